#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "isp/rs.hpp"

namespace isp {

// Sequences are stored 1-based: element 0 is unused (Gamma_cum[0] = Lambda_cum[0] = 0).
struct SeTrace {
  std::vector<double> rho, mu, lambda, gamma, Gamma_cum, Lambda_cum;
  Eigen::MatrixXd Gamma_mat;   // (t-1) x (t-1)
  Eigen::MatrixXd Lambda_mat;  // t x t
  int t = 0;                   // steps computed
  bool converged = false;
  double max_clamp = 0.0;      // largest |mu| or |rho| excess clamped
};

std::pair<double, double> se_init(const ActivationSpec& spec, const RsSolution& sol, int order = 201);
// (rho(mu_prev), mu(rho_prev))
std::pair<double, double> se_step(const ActivationSpec& spec, const RsSolution& sol, double mu_prev,
                                  double rho_prev, int order = 201);
double se_rho(const RsSolution& sol, double mu, int order = 201);
double se_mu(const ActivationSpec& spec, const RsSolution& sol, double rho, int order = 201);

// Stops early once 1 - Gamma_s and 1 - Lambda_s both drop below eps_conv (eps_conv = 0 disables).
SeTrace se_run(const ActivationSpec& spec, const RsSolution& sol, int t_max = 200, double eps_conv = 1e-8,
               int order = 201);

// Gamma ((t-1)x(t-1)) and Lambda (t x t) built from the first t steps of a trace.
Eigen::MatrixXd gamma_matrix(const SeTrace& se, int t);
Eigen::MatrixXd lambda_matrix(const SeTrace& se, int t);

}  // namespace isp
