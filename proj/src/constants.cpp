#include <algorithm>
#include <cmath>

#include "isp/activation.hpp"

namespace isp {

std::vector<double> c_grid(double lo, double hi, double step) {
  std::vector<double> g;
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i) g.push_back(lo + i * step);
  if (hi - g.back() > 1e-9) g.push_back(hi);
  return g;
}

std::vector<double> k2_prime_c_grid(const GridConfig& g) {
  // The K2 grid extended on both sides so the sup dominates by construction.
  std::vector<double> base = c_grid(g.c_lo, g.c_hi, g.c_step);
  std::vector<double> out;
  for (double c = g.c_lo - g.c_step; c > g.cp_lo + 1e-9; c -= g.c_step) out.push_back(c);
  out.push_back(g.cp_lo);
  out.insert(out.end(), base.begin(), base.end());
  for (double c = g.c_hi + g.c_step; c < g.cp_hi - 1e-9; c += g.c_step) out.push_back(c);
  out.push_back(g.cp_hi);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
            out.end());
  return out;
}

std::vector<double> x_grid(const GridConfig& g) {
  std::vector<double> xs;
  const int n = static_cast<int>(std::lround(2 * g.x_max / g.x_step));
  for (int i = 0; i <= n; ++i) xs.push_back(-g.x_max + i * g.x_step);
  return xs;
}

double k2_ratio(const ActivationSpec& spec, double x, double c) {
  // E[(xi - xi')^2 U U'] / E[U U'] factorizes into twice the tilted variance.
  const Tilt t = tilt(spec, x, c, 2);
  return 2.0 * (t.m[2] - t.m[1] * t.m[1]);
}

namespace {

struct PointResult {
  double k2 = -1.0;
  double c1 = -INFINITY;
  bool skipped = false;
};

double sup_k2(const ActivationSpec& spec, const std::vector<double>& xs, const std::vector<double>& cs,
              int& skipped) {
  const int n = static_cast<int>(xs.size() * cs.size());
  std::vector<PointResult> res(n);
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    slot.run([&] {
      const double x = xs[i / cs.size()], c = cs[i % cs.size()];
      try {
        res[i].k2 = k2_ratio(spec, x, c);
      } catch (const VanishingMass&) {
        res[i].skipped = true;
      }
    });
  }
  slot.rethrow();
  double best = 1.0;
  for (const auto& r : res) {
    if (r.skipped)
      ++skipped;
    else
      best = std::max(best, r.k2);
  }
  return best;
}

}  // namespace

ConstantsReport estimate_constants(const ActivationSpec& spec, const GridConfig& grid, ConstMode mode) {
  ConstantsReport rep;
  rep.mode = mode;
  rep.c0 = grid.abs_c0;
  rep.c1 = grid.abs_c1;
  const auto xs = x_grid(grid);
  const auto cs = c_grid(grid.c_lo, grid.c_hi, grid.c_step);
  const auto cps = k2_prime_c_grid(grid);

  int skipped = 0;
  rep.k2_empirical = sup_k2(spec, xs, cs, skipped);
  int skipped_wide = 0;
  rep.k2_prime_empirical = sup_k2(spec, xs, cps, skipped_wide);

  // Moment bound constant over the same (x,c) grid.
  const int n = static_cast<int>(xs.size() * cs.size());
  const int pmax = grid.p_max;
  std::vector<PointResult> res(n);
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    slot.run([&] {
      const double x = xs[i / cs.size()], c = cs[i % cs.size()];
      double r[16];
      raw_abs_moments(spec, x, c, pmax, r);
      if (!(r[0] > mass_floor(spec))) {
        res[i].skipped = true;
        return;
      }
      double best = -INFINITY;
      for (int p = 0; p <= pmax; ++p) best = std::max(best, r[p] / r[0] - std::pow(1.82 * std::abs(x) / c, p));
      res[i].c1 = best;
    });
  }
  slot.rethrow();
  double c1 = 10.0;
  for (const auto& r : res) {
    if (r.skipped)
      ++skipped;
    else
      c1 = std::max(c1, r.c1);
  }
  rep.c1_empirical = c1;
  rep.skipped = skipped;

  double cbar = 2.0;
  for (double c : cs) {
    double r[1];
    raw_moments(spec, 0.0, c, 0, r);
    cbar = std::max(cbar, r[0] > 0 ? 1.0 / r[0] : INFINITY);
  }
  rep.cbar1 = cbar;
  rep.k0 = std::max(2.0, std::sqrt(8.0 * std::log(cbar)));
  const double lead = 200.0 * std::log10(4.0 * rep.k0);
  rep.c1_proof_log10 = lead + std::log10(1.0 + grid.abs_c0 * cbar * std::pow(10.0, -lead));
  rep.c1_proof_overflow = rep.c1_proof_log10 > 308.0;
  rep.c1_proof = rep.c1_proof_overflow ? INFINITY : std::pow(10.0, rep.c1_proof_log10);

  const double C1log = mode == ConstMode::proof ? rep.c1_proof_log10 : std::log10(rep.c1_empirical);
  const double e = std::log10(std::exp(1.0));
  rep.alpha_threshold_log10 =
      -(10.0 * e + std::log10(grid.abs_c1) + 6.0 * C1log + 4.0 * std::log10(rep.k2_empirical));
  rep.alpha_prime_threshold_log10 =
      -(16.0 * e + std::log10(grid.abs_c1) + 6.0 * C1log + 4.0 * std::log10(rep.k2_prime_empirical));
  rep.alpha_threshold = std::pow(10.0, rep.alpha_threshold_log10);
  rep.alpha_prime_threshold = std::pow(10.0, rep.alpha_prime_threshold_log10);
  return rep;
}

}  // namespace isp
