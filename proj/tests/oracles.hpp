#pragma once

// Independent reference implementations used only by the tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "isp/activation.hpp"
#include "isp/amp.hpp"

namespace oracle {

inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
inline double Phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Trapezoid rule for E f(Z) on [-lim, lim].
inline double trapz(const std::function<double(double)>& f, int n = 1000001, double lim = 10.0) {
  const double h = 2 * lim / (n - 1);
  long double s = 0;
  for (int i = 0; i < n; ++i) {
    const double z = -lim + i * h;
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    s += w * f(z) * phi(z);
  }
  return static_cast<double>(s * h);
}

// Trapezoid rule for the integral of f(z) phi(z) over [a, b].
inline double trapz_on(const std::function<double(double)>& f, double a, double b, int n = 200001) {
  const double h = (b - a) / (n - 1);
  long double s = 0;
  for (int i = 0; i < n; ++i) {
    const double z = a + i * h;
    s += ((i == 0 || i == n - 1) ? 0.5 : 1.0) * f(z) * phi(z);
  }
  return static_cast<double>(s * h);
}

// Trapezoid rule for E f(Z, Z') on [-lim, lim]^2.
inline double trapz2(const std::function<double(double, double)>& f, int n = 2001, double lim = 9.0) {
  const double h = 2 * lim / (n - 1);
  long double s = 0;
  for (int i = 0; i < n; ++i) {
    const double z = -lim + i * h;
    const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    long double r = 0;
    for (int j = 0; j < n; ++j) {
      const double u = -lim + j * h;
      const double wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      r += wj * f(z, u) * phi(u);
    }
    s += wi * r * phi(z);
  }
  return static_cast<double>(s * h * h);
}

// Halfspace closed forms: E U(x + c xi) = Phi((x - kappa)/c).
inline double hs_mass(double kappa, double x, double c) { return Phi((x - kappa) / c); }
inline double hs_F(double kappa, double q, double x) {
  const double c = std::sqrt(1 - q), u = (x - kappa) / c;
  return phi(u) / (c * Phi(u));
}

// Damped Picard iteration for the halfspace fixed point, expectations by trapezoid.
struct FixedPoint {
  double q, psi;
};
inline FixedPoint hs_picard(double kappa, double alpha, double damping = 0.5, double tol = 1e-14) {
  auto qbar = [](double psi) {
    return trapz([&](double z) { return std::pow(std::tanh(std::sqrt(psi) * z), 2); }, 40001, 12.0);
  };
  auto rbar = [&](double q) {
    return trapz([&](double z) { return std::pow(hs_F(kappa, q, std::sqrt(q) * z), 2); }, 40001, 12.0);
  };
  double q = 0.0;
  for (int it = 0; it < 10000; ++it) {
    const double next = qbar(alpha * rbar(q));
    const double nq = damping * q + (1 - damping) * next;
    if (std::abs(nq - q) < tol) {
      q = nq;
      break;
    }
    q = nq;
  }
  return {q, alpha * rbar(q)};
}

// Naive enumeration: every configuration from scratch.
struct NaiveZ {
  std::uint64_t count = 0;
  double logZ = -INFINITY;
};
inline NaiveZ naive_enumerate(const isp::ActivationSpec& spec, const isp::RowMatrix& G, bool counting) {
  const int M = static_cast<int>(G.rows()), N = static_cast<int>(G.cols());
  NaiveZ out;
  std::vector<double> logw;
  for (std::uint64_t b = 0; b < (std::uint64_t(1) << N); ++b) {
    double lw = 0.0;
    bool ok = true;
    for (int a = 0; a < M && ok; ++a) {
      double s = 0.0;
      for (int i = 0; i < N; ++i) s += G(a, i) * ((b >> i) & 1 ? -1.0 : 1.0);
      const double u = isp::eval_U(spec, s / std::sqrt(double(N)));
      if (counting) {
        ok = u > 0.5;
      } else if (u > 0) {
        lw += std::log(u);
      } else {
        ok = false;
      }
    }
    if (!ok) continue;
    ++out.count;
    logw.push_back(lw);
  }
  if (counting) {
    if (out.count) out.logZ = std::log(double(out.count));
    return out;
  }
  if (logw.empty()) return out;
  double mx = logw[0];
  for (double v : logw) mx = std::max(mx, v);
  long double s = 0;
  for (double v : logw) s += std::exp(static_cast<long double>(v - mx));
  out.logZ = mx + std::log(static_cast<double>(s));
  return out;
}

// Straight Psi evaluation with explicit loops and the halfspace closed form.
inline double psi_halfspace(double kappa, const Eigen::VectorXd& pi, const Eigen::VectorXd& varpi,
                            const isp::AmpTrace& tr, double eps) {
  const int t = tr.t, M = tr.M, N = tr.N;
  std::vector<double> vs(t - 1);
  for (int l = 0; l < t - 1; ++l) vs[l] = (1 - tr.q) * std::sqrt(tr.psi) * tr.Gamma(t - 2, l);
  double p2 = 0;
  for (int s = 0; s < t; ++s) p2 += pi[s] * pi[s];
  const double c2 = 1 - p2, c = std::sqrt(c2);
  double w2 = 0, cross = 0;
  for (int l = 0; l < t - 1; ++l) {
    const double w = varpi[l] - eps * (varpi[l] - vs[l]);
    w2 += w * w;
    cross += vs[l] * varpi[l];
  }
  double lsum = 0;
  for (int a = 0; a < M; ++a) {
    double X = 0;
    for (int s = 0; s < t; ++s) X += tr.x(s, a) * pi[s];
    for (int l = 0; l < t - 1; ++l) X += std::sqrt(double(N)) * eps * tr.c(l, a) * (varpi[l] - vs[l]);
    lsum += std::log(hs_mass(kappa, X, c));
  }
  return w2 / (2 * c2) - cross / (1 - tr.q) + lsum / N;
}

// Conditional mean of G given (G r, G^T c) by Matheron's rule, with a generic pseudo-inverse
// of the constraint covariance.
inline Eigen::MatrixXd conditional_mean(const Eigen::MatrixXd& G, const Eigen::VectorXd& r, const Eigen::VectorXd& c) {
  const int M = static_cast<int>(G.rows()), N = static_cast<int>(G.cols());
  // constraints: vec(G) -> [G r ; G^T c], linear map A of size (M+N) x (MN), column-major vec
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(M + N, M * N);
  for (int a = 0; a < M; ++a)
    for (int i = 0; i < N; ++i) {
      A(a, a + i * M) = r[i];
      A(M + i, a + i * M) = c[a];
    }
  Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(G.data(), M * N);
  const Eigen::MatrixXd S = A * A.transpose();
  const Eigen::MatrixXd Sp = S.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::VectorXd mean = A.transpose() * (Sp * (A * g));
  return Eigen::Map<const Eigen::MatrixXd>(mean.data(), M, N);
}

}  // namespace oracle
