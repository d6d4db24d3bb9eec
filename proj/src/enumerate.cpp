#include <chrono>
#include <cmath>
#include <limits>

#include "isp/moments.hpp"
#include "isp/rs.hpp"

namespace isp {

namespace {

constexpr std::uint64_t kResync = 4096;  // steps between exact recomputations of G J

bool is_indicator(const ActivationSpec& spec) {
  return spec.eta == 0.0 && (spec.kind == Kind::halfspace || spec.kind == Kind::band);
}

struct BlockAcc {
  std::uint64_t count = 0;
  double mx = -std::numeric_limits<double>::infinity();  // running max of log weights
  double s = 0.0;                                          // sum exp(w - mx)
};

void recompute(const RowMatrix& G, const std::vector<double>& J, std::vector<double>& s) {
  const int M = static_cast<int>(G.rows()), N = static_cast<int>(G.cols());
  for (int a = 0; a < M; ++a) {
    double acc = 0.0;
    for (int i = 0; i < N; ++i) acc += G(a, i) * J[i];
    s[a] = acc;
  }
}

// Gray-code walk over the low `nlow` spins with the high spins fixed by `block`.
BlockAcc run_block(const ActivationSpec& spec, const RowMatrix& G, int nlow, std::uint64_t block, bool counting) {
  const int M = static_cast<int>(G.rows()), N = static_cast<int>(G.cols());
  const double isq = 1.0 / std::sqrt(double(N));
  std::vector<double> J(N, 1.0), s(M);
  for (int i = nlow; i < N; ++i) J[i] = (block >> (i - nlow)) & 1 ? -1.0 : 1.0;
  recompute(G, J, s);
  BlockAcc acc;
  const std::uint64_t steps = std::uint64_t(1) << nlow;
  for (std::uint64_t k = 0; k < steps; ++k) {
    if (k > 0) {
      const int b = __builtin_ctzll(k);
      J[b] = -J[b];
      if (k % kResync == 0) {
        recompute(G, J, s);
      } else {
        const double d = 2.0 * J[b];
        for (int a = 0; a < M; ++a) s[a] += d * G(a, b);
      }
    }
    if (counting) {
      bool ok = true;
      for (int a = 0; a < M && ok; ++a) ok = eval_U(spec, s[a] * isq) > 0.5;
      acc.count += ok;
    } else {
      double w = 0.0;
      for (int a = 0; a < M; ++a) {
        const double u = eval_U(spec, s[a] * isq);
        if (!(u > 0)) {
          w = -std::numeric_limits<double>::infinity();
          break;
        }
        w += std::log(u);
      }
      if (w == -std::numeric_limits<double>::infinity()) continue;
      if (w > acc.mx) {
        acc.s = acc.s * std::exp(acc.mx - w) + 1.0;
        acc.mx = w;
      } else {
        acc.s += std::exp(w - acc.mx);
      }
    }
  }
  return acc;
}

}  // namespace

EnumerationResult enumerate_logZ(const ActivationSpec& spec, const RowMatrix& G, double tau_trunc,
                                 const EnumOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  EnumerationResult res;
  res.N = static_cast<int>(G.cols());
  res.M = static_cast<int>(G.rows());
  const int N = res.N;
  if (N < 1) throw UsageError("enumeration needs N >= 1");
  if (N > opts.cap)
    throw UsageError("N = " + std::to_string(N) + " exceeds the enumeration cap " + std::to_string(opts.cap));
  res.counting = is_indicator(spec) && !opts.force_log;

  int k = opts.top_bits >= 0 ? opts.top_bits : std::max(0, std::min(8, N - 10));
  k = std::min(k, N);
  const int nlow = N - k;
  const std::uint64_t nblocks = std::uint64_t(1) << k;
  std::vector<BlockAcc> blocks(nblocks);
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 1) if (opts.parallel && nblocks > 1)
  for (long long b = 0; b < static_cast<long long>(nblocks); ++b)
    slot.run([&] { blocks[b] = run_block(spec, G, nlow, static_cast<std::uint64_t>(b), res.counting); });
  slot.rethrow();

  const double ninf = -std::numeric_limits<double>::infinity();
  if (res.counting) {
    for (const auto& b : blocks) res.count_feasible += b.count;
    res.zero = res.count_feasible == 0;
    res.logZ = res.zero ? ninf : std::log(double(res.count_feasible));
    res.per_config_max_weight = res.zero ? ninf : 0.0;
  } else {
    double mx = ninf;
    for (const auto& b : blocks) mx = std::max(mx, b.mx);
    res.per_config_max_weight = mx;
    if (mx == ninf) {
      res.zero = true;
      res.logZ = ninf;
    } else {
      double s = 0.0;
      for (const auto& b : blocks)
        if (b.mx != ninf) s += b.s * std::exp(b.mx - mx);
      res.logZ = mx + std::log(s);
    }
  }
  const double nl2 = N * std::log(2.0);
  res.logZ_truncated = log_trunc(N * tau_trunc, res.logZ - nl2) + nl2;
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::vector<ExperimentRow> free_energy_experiment(const ActivationSpec& spec, double alpha,
                                                  const std::vector<int>& Ns, int samples, std::uint64_t seed,
                                                  const ExperimentOptions& opts) {
  if (!(alpha > 0)) throw UsageError("alpha must be positive");
  if (samples < 1) throw UsageError("need at least one disorder sample");
  auto rs_at = [&](double a) {
    if (a <= 0) return std::log(2.0);
    const RsSolution sol = solve_fixed_point(spec, a, opts.rs);
    if (!sol.converged) throw NumericalError("RS reference did not converge at alpha = " + fmt17(a));
    return sol.rs_value;
  };
  const double rs_alpha = rs_at(alpha);
  std::vector<ExperimentRow> rows;
  for (int N : Ns) {
    ExperimentRow row;
    row.N = N;
    row.M = static_cast<int>(std::lround(alpha * N));
    row.samples = samples;
    row.rs_reference = rs_alpha;
    row.rs_density = rs_at(double(row.M) / N);
    const double A = opts.trunc_per_spin * N, nl2 = N * std::log(2.0);
    std::vector<double> v(samples);
    for (int s = 0; s < samples; ++s) {
      if (row.M == 0) {
        v[s] = std::log(2.0);
        continue;
      }
      const RowMatrix G = gaussian_matrix(row.M, N, seed, (std::uint64_t(N) << 32) | std::uint64_t(s));
      const EnumerationResult e = enumerate_logZ(spec, G, kTauTrunc, opts.enumeration);
      row.zero_events += e.zero;
      v[s] = (log_trunc(A, e.logZ - nl2) + nl2) / N;
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= samples;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    row.mean = mean;
    row.stderr_ = samples > 1 ? std::sqrt(var / (samples - 1) / samples) : 0.0;
    row.deviation = mean - row.rs_reference;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace isp
