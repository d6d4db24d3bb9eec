#include "isp/rs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace isp {

double log2cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a));
}

double qbar(double psi, const QuadratureRule& rule) {
  if (psi < 0) throw UsageError("qbar needs psi >= 0");
  const double s = std::sqrt(psi);
  return expect_g([s](double z) { const double t = std::tanh(s * z); return t * t; }, rule);
}

double qbar(double psi) { return qbar(psi, gauss_rule(201)); }

double qbar_inverse(double q, const QuadratureRule& rule) {
  if (q <= 0) return 0.0;
  if (q >= 1) throw NumericalError("qbar_inverse needs q < 1");
  double lo = 0.0, hi = std::max(1.0, 4.0 * q);
  while (qbar(hi, rule) < q) {
    lo = hi;
    hi *= 2;
    if (hi > 1e8) throw NumericalError("qbar_inverse bracket failed");
  }
  // Run until the bracket stops shrinking.
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (qbar(mid, rule) < q)
      lo = mid;
    else
      hi = mid;
  }
  return std::abs(qbar(lo, rule) - q) <= std::abs(qbar(hi, rule) - q) ? lo : hi;
}

double rbar(const ActivationSpec& spec, double q, const QuadratureRule& rule) {
  if (q < 0 || q >= 1) throw UsageError("rbar needs q in [0,1)");
  const double s = std::sqrt(q);
  return expect_g([&](double z) { const double f = F(spec, q, s * z); return f * f; }, rule);
}

double rbar(const ActivationSpec& spec, double q) { return rbar(spec, q, gauss_rule(spec.quad_order)); }

double root_fn(const ActivationSpec& spec, double alpha, double q, const QuadratureRule& rule) {
  return qbar_inverse(q, rule) / alpha - rbar(spec, q, rule);
}

RsSolution solve_fixed_point(const ActivationSpec& spec, double alpha, const RsOptions& opts) {
  if (!(alpha > 0)) throw UsageError("alpha must be positive");
  if (std::abs(opts.q_max - 1.0 / 25.0) > 1e-15)
    warn_once("q_max overridden to " + fmt17(opts.q_max) + "; uniqueness is only established on [0, 1/25]");
  const QuadratureRule& rule = gauss_rule(opts.quad_order);
  RsSolution sol;
  sol.alpha = alpha;

  if (std::abs(mean_score(spec)) < 1e-10) {
    sol.q = sol.psi = 0.0;
    sol.converged = true;
    sol.annealed_branch = true;
    sol.residual = 0.0;
  } else {
    const int n = std::max(opts.scan_points, 2);
    std::vector<double> qs(n + 1), gs(n + 1);
    ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i <= n; ++i) {
      slot.run([&] {
        qs[i] = opts.q_max * i / n;
        gs[i] = root_fn(spec, alpha, qs[i], rule);
      });
    }
    slot.rethrow();
    for (int i = 0; i < n; ++i) {
      if ((gs[i] < 0) != (gs[i + 1] < 0) || gs[i + 1] == 0) {
        sol.brackets.emplace_back(qs[i], qs[i + 1]);
      }
    }
    sol.sign_changes = static_cast<int>(sol.brackets.size());
    if (sol.brackets.empty()) {
      sol.converged = false;
      sol.brackets.emplace_back(0.0, opts.q_max);
      throw NumericalError("no bracketing root of the fixed-point map on [0, " + fmt17(opts.q_max) +
                           "] (alpha too large for q_max)");
    }
    if (sol.brackets.size() > 1) {
      std::string msg = "multiple roots detected; brackets:";
      for (auto [a, b] : sol.brackets) msg += " [" + fmt17(a) + "," + fmt17(b) + "]";
      throw NumericalError(msg);
    }
    double lo = sol.brackets[0].first, hi = sol.brackets[0].second;
    double glo = root_fn(spec, alpha, lo, rule);
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double gm = root_fn(spec, alpha, mid, rule);
      if (gm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((gm < 0) == (glo < 0)) {
        lo = mid;
        glo = gm;
      } else {
        hi = mid;
      }
    }
    const double ghi = root_fn(spec, alpha, hi, rule);
    const double q = std::abs(glo) <= std::abs(ghi) ? lo : hi;
    sol.q = q;
    sol.psi = qbar_inverse(q, rule);
    sol.residual = std::abs(root_fn(spec, alpha, q, rule));
    sol.converged = (hi - lo) <= std::max(opts.tol, 4 * std::numeric_limits<double>::epsilon() * q) ||
                    sol.residual <= opts.tol;
  }
  sol.rs_value = rs_free_energy(spec, alpha, sol, opts.quad_order);
  sol.annealed_value = annealed(spec, alpha);
  auto [b, ba] = onsager(spec, sol, opts.quad_order);
  sol.beta = b;
  sol.beta_acute = ba;
  sol.at_value = at_condition(spec, alpha, sol, opts.quad_order);
  return sol;
}

double rs_free_energy(const ActivationSpec& spec, double alpha, const RsSolution& sol, int order) {
  const QuadratureRule& rule = gauss_rule(order);
  const double sp = std::sqrt(sol.psi), sq = std::sqrt(sol.q);
  const double ent = expect_g([sp](double z) { return log2cosh(sp * z); }, rule);
  double ll = 0.0;
  if (alpha != 0.0) ll = expect_g([&](double z) { return L(spec, sol.q, sq * z); }, rule);
  return -0.5 * sol.psi * (1.0 - sol.q) + ent + alpha * ll;
}

double annealed(const ActivationSpec& spec, double alpha) {
  if (alpha == 0.0) return std::log(2.0);
  return std::log(2.0) + alpha * L(spec, 0.0, 0.0);
}

std::pair<double, double> onsager(const ActivationSpec& spec, const RsSolution& sol, int order) {
  const QuadratureRule& rule = gauss_rule(order);
  const double sp = std::sqrt(sol.psi), sq = std::sqrt(sol.q);
  double beta = 0.0;
  if (sol.alpha != 0.0) beta = sol.alpha * expect_g([&](double z) { return F_prime(spec, sol.q, sq * z); }, rule);
  const double beta_acute = expect_g(
      [sp](double z) { const double t = std::tanh(sp * z); return 1.0 - t * t; }, rule);
  if (std::abs(beta_acute - (1.0 - sol.q)) > 1e-8)
    throw NumericalError("Onsager identity beta_acute = 1 - q violated: " + fmt17(beta_acute) + " vs " +
                         fmt17(1.0 - sol.q));
  return {beta, beta_acute};
}

double at_condition(const ActivationSpec& spec, double alpha, const RsSolution& sol, int order) {
  if (alpha == 0.0) return 0.0;
  const QuadratureRule& rule = gauss_rule(order);
  const double sp = std::sqrt(sol.psi), sq = std::sqrt(sol.q);
  const double f2 = expect_g([&](double z) { const double f = F_prime(spec, sol.q, sq * z); return f * f; }, rule);
  const double t2 = expect_g(
      [sp](double z) { const double t = std::tanh(sp * z); const double d = 1.0 - t * t; return d * d; }, rule);
  return alpha * f2 * t2;
}

std::vector<EtaRow> rs_eta_sweep(const ActivationSpec& spec, double alpha, const std::vector<double>& etas,
                                 const RsOptions& opts) {
  std::vector<EtaRow> rows(etas.size());
  for (std::size_t i = 0; i < etas.size(); ++i) {
    rows[i].eta = etas[i];
    try {
      const ActivationSpec s = smooth(spec, etas[i]);
      const RsSolution sol = solve_fixed_point(s, alpha, opts);
      rows[i].q = sol.q;
      rows[i].psi = sol.psi;
      rows[i].rs = sol.rs_value;
      rows[i].ok = sol.converged;
    } catch (const std::exception& e) {
      rows[i].ok = false;
      rows[i].error = e.what();
    }
  }
  return rows;
}

}  // namespace isp
