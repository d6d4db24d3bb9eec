#pragma once

#include <string>
#include <utility>
#include <vector>

#include "isp/activation.hpp"

namespace isp {

struct RsOptions {
  double q_max = 1.0 / 25.0;
  double tol = 1e-12;    // bisection tolerance on q and psi
  int scan_points = 400; // uniqueness scan on [0, q_max]
  int quad_order = 201;
};

struct RsSolution {
  double alpha = 0, q = 0, psi = 0;
  double rs_value = 0, annealed_value = 0;
  double beta = 0, beta_acute = 1, at_value = 0;
  bool converged = false;
  double residual = 0;
  bool annealed_branch = false;
  int sign_changes = 0;
  std::vector<std::pair<double, double>> brackets;
};

double qbar(double psi, const QuadratureRule& rule);
double qbar(double psi);
// Inverse of qbar by bisection; qbar is strictly increasing.
double qbar_inverse(double q, const QuadratureRule& rule);
double rbar(const ActivationSpec& spec, double q, const QuadratureRule& rule);
double rbar(const ActivationSpec& spec, double q);
// q -> qbar^{-1}(q)/alpha - rbar(q)
double root_fn(const ActivationSpec& spec, double alpha, double q, const QuadratureRule& rule);

RsSolution solve_fixed_point(const ActivationSpec& spec, double alpha, const RsOptions& opts = {});

double rs_free_energy(const ActivationSpec& spec, double alpha, const RsSolution& sol, int order = 201);
double annealed(const ActivationSpec& spec, double alpha);
std::pair<double, double> onsager(const ActivationSpec& spec, const RsSolution& sol, int order = 201);
double at_condition(const ActivationSpec& spec, double alpha, const RsSolution& sol, int order = 201);

// log 2cosh(x) without overflow.
double log2cosh(double x);

struct EtaRow {
  double eta = 0, q = 0, psi = 0, rs = 0;
  bool ok = false;
  std::string error;
};

std::vector<EtaRow> rs_eta_sweep(const ActivationSpec& spec, double alpha, const std::vector<double>& etas,
                                 const RsOptions& opts = {});

}  // namespace isp
