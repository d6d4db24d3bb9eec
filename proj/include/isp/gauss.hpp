#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "isp/error.hpp"
#include "isp/util.hpp"

namespace isp {

// Gauss-Hermite rule for the standard normal measure.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;
};

QuadratureRule hermite_rule(int order);

// Cached rule, built on first use.
const QuadratureRule& gauss_rule(int order = 201);

inline double norm_pdf(double x) { return 0.39894228040143267794 * std::exp(-0.5 * x * x); }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }
inline double norm_sf(double x) { return 0.5 * std::erfc(x * 0.70710678118654752440); }

// E xi^k for a standard normal.
double gaussian_moment(int k);

// out[k] = integral over [lo, hi] of z^k phi(z) dz, k = 0..pmax. Infinite ends allowed.
void interval_moments(double lo, double hi, int pmax, double* out);

// Same with |z|^k.
void interval_abs_moments(double lo, double hi, int pmax, double* out);

template <class Fn>
double expect_g(Fn&& f, const QuadratureRule& rule) {
  double s = 0.0;
  for (int i = 0; i < rule.order; ++i) {
    const double v = f(rule.nodes[i]);
    if (!std::isfinite(v)) throw NumericalError("non-finite integrand");
    s += rule.weights[i] * v;
  }
  return s;
}

// Tensor-product rule; rows run in parallel, the final sum is in fixed order.
template <class Fn>
double expect_g2(Fn&& f, const QuadratureRule& rule) {
  const int n = rule.order;
  std::vector<double> row(n, 0.0);
  ExceptionSlot slot;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    slot.run([&] {
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        const double v = f(rule.nodes[i], rule.nodes[j]);
        if (!std::isfinite(v)) throw NumericalError("non-finite integrand");
        s += rule.weights[j] * v;
      }
      row[i] = rule.weights[i] * s;
    });
  }
  slot.rethrow();
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += row[i];
  return s;
}

// Adaptive Simpson for a vector-valued integrand f(z, out[0..dim)).
// Integrates each piece between consecutive breakpoints separately.
void adaptive_simpson(const std::function<void(double, double*)>& f, int dim,
                      std::vector<double> breaks, double tol, double* out);

}  // namespace isp
