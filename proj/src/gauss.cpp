#include "isp/gauss.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <mutex>

#include <Eigen/Eigenvalues>

namespace isp {

namespace {

// Orthonormal Hermite values p_n(x), p_{n-1}(x) for the standard normal weight, both divided
// by exp(log_scale) so that large orders stay in range.
void orthonormal_hermite(int n, double x, double& pn, double& pnm1, double& log_scale) {
  double p0 = 1.0, p1 = x;
  log_scale = 0.0;
  if (n == 0) {
    pn = 1.0;
    pnm1 = 0.0;
    return;
  }
  for (int k = 1; k < n; ++k) {
    const double p2 = (x * p1 - std::sqrt(double(k)) * p0) / std::sqrt(double(k + 1));
    p0 = p1;
    p1 = p2;
    const double big = std::max(std::abs(p0), std::abs(p1));
    if (big > 1e100) {
      p0 /= big;
      p1 /= big;
      log_scale += std::log(big);
    }
  }
  pn = p1;
  pnm1 = p0;
}

}  // namespace

QuadratureRule hermite_rule(int order) {
  if (order < 1) throw UsageError("quadrature order must be positive");
  const int n = order;
  // Golub-Welsch start, then Newton polish on the recurrence.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int k = 0; k + 1 < n; ++k) sub[k] = std::sqrt(double(k + 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  Eigen::VectorXd x0 = es.eigenvalues();

  QuadratureRule r;
  r.order = n;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = x0[i];
    for (int it = 0; it < 4; ++it) {
      double pn, pm, ls;
      orthonormal_hermite(n, x, pn, pm, ls);
      const double dp = std::sqrt(double(n)) * pm;
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    double pn, pm, ls;
    orthonormal_hermite(n, x, pn, pm, ls);
    r.nodes[i] = x;
    r.weights[i] = std::exp(-2.0 * ls) / (double(n) * pm * pm);
  }
  // Enforce exact symmetry.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[j]);
    r.nodes[i] = -x;
    r.nodes[j] = x;
    r.weights[i] = r.weights[j] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  double s = 0.0;
  for (double w : r.weights) s += w;
  for (double& w : r.weights) w /= s;
  return r;
}

const QuadratureRule& gauss_rule(int order) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<QuadratureRule>(hermite_rule(order));
  return *slot;
}

double gaussian_moment(int k) {
  if (k % 2 == 1) return 0.0;
  double v = 1.0;
  for (int j = k - 1; j > 0; j -= 2) v *= j;
  return v;
}

namespace {

// Upper tail moments T_k(u) = int_u^inf z^k phi, k = 0..pmax.
void upper_tail(double u, int pmax, double* t) {
  if (u == -std::numeric_limits<double>::infinity()) {
    for (int k = 0; k <= pmax; ++k) t[k] = gaussian_moment(k);
    return;
  }
  if (u == std::numeric_limits<double>::infinity()) {
    for (int k = 0; k <= pmax; ++k) t[k] = 0.0;
    return;
  }
  const double ph = norm_pdf(u);
  t[0] = norm_sf(u);
  if (pmax >= 1) t[1] = ph;
  double upow = 1.0;  // u^{k-1}
  for (int k = 2; k <= pmax; ++k) {
    upow *= u;
    t[k] = upow * ph + (k - 1) * t[k - 2];
  }
}

}  // namespace

void interval_moments(double lo, double hi, int pmax, double* out) {
  if (!(lo < hi)) {
    for (int k = 0; k <= pmax; ++k) out[k] = 0.0;
    return;
  }
  if (hi <= 0.0) {
    interval_moments(-hi, -lo, pmax, out);
    for (int k = 1; k <= pmax; k += 2) out[k] = -out[k];
    return;
  }
  double a[16], b[16];
  if (lo >= 0.0) {
    upper_tail(lo, pmax, a);
    upper_tail(hi, pmax, b);
    for (int k = 0; k <= pmax; ++k) out[k] = a[k] - b[k];
    return;
  }
  upper_tail(-lo, pmax, a);
  upper_tail(hi, pmax, b);
  for (int k = 0; k <= pmax; ++k) {
    const double left = (k % 2 == 0) ? a[k] : -a[k];
    out[k] = gaussian_moment(k) - left - b[k];
  }
}

void interval_abs_moments(double lo, double hi, int pmax, double* out) {
  double p[16], n[16];
  interval_moments(std::max(lo, 0.0), hi, pmax, p);
  interval_moments(lo, std::min(hi, 0.0), pmax, n);
  for (int k = 0; k <= pmax; ++k) out[k] = p[k] + ((k % 2 == 0) ? n[k] : -n[k]);
}

namespace {

struct Simpson {
  const std::function<void(double, double*)>& f;
  int dim;
  int depth_limit = 48;

  double err(const double* a, const double* b) const {
    double e = 0.0;
    for (int k = 0; k < dim; ++k) e = std::max(e, std::abs(a[k] - b[k]));
    return e;
  }

  void step(double a, double b, const std::vector<double>& fa, const std::vector<double>& fm,
            const std::vector<double>& fb, const std::vector<double>& whole, double tol, int depth,
            double* out) const {
    const double m = 0.5 * (a + b);
    std::vector<double> flm(dim), frm(dim), left(dim), right(dim), both(dim);
    f(0.5 * (a + m), flm.data());
    f(0.5 * (m + b), frm.data());
    const double h = (b - a) / 12.0;
    for (int k = 0; k < dim; ++k) {
      left[k] = h * (fa[k] + 4 * flm[k] + fm[k]);
      right[k] = h * (fm[k] + 4 * frm[k] + fb[k]);
      both[k] = left[k] + right[k];
    }
    if (depth >= depth_limit || err(both.data(), whole.data()) <= 15 * tol) {
      for (int k = 0; k < dim; ++k) out[k] += both[k] + (both[k] - whole[k]) / 15.0;
      return;
    }
    step(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, out);
    step(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, out);
  }
};

}  // namespace

void adaptive_simpson(const std::function<void(double, double*)>& f, int dim,
                      std::vector<double> breaks, double tol, double* out) {
  for (int k = 0; k < dim; ++k) out[k] = 0.0;
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  if (breaks.size() < 2) return;
  const double span = breaks.back() - breaks.front();
  Simpson s{f, dim};
  std::vector<double> fa(dim), fm(dim), fb(dim), whole(dim);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    if (!(b > a)) continue;
    // Seed with a few uniform panels so narrow features are not missed.
    const int panels = 8;
    const double w = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
      const double lo = a + p * w, hi = (p + 1 == panels) ? b : lo + w, mid = 0.5 * (lo + hi);
      f(lo, fa.data());
      f(mid, fm.data());
      f(hi, fb.data());
      for (int k = 0; k < dim; ++k) whole[k] = (hi - lo) / 6.0 * (fa[k] + 4 * fm[k] + fb[k]);
      s.step(lo, hi, fa, fm, fb, whole, tol * (hi - lo) / span, 0, out);
    }
  }
}

}  // namespace isp
