#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isp/amp.hpp"

namespace isp {

// Desk-scale constants derived from the empirical constants report.
struct DeskParams {
  double c1 = 10, k2 = 1;
  double eps_bar = 0;  // min(e^5 c1 sqrt(alpha), 1/(c1^2 k2))
  double radius = 0;   // 16 c1 sqrt(alpha)
  double L_cap = 0;    // 5 c1^2
};

DeskParams desk_params(const ConstantsReport& rep, double alpha);

struct OverlapParams {
  Eigen::VectorXd pi, varpi, pi_hat, delta, pi_star, varpi_star;
  Eigen::VectorXd v;  // J'' / |J''|
  double norm_Jpp = 0;
  double lambda_pair = std::numeric_limits<double>::quiet_NaN();
  double eps_bar = 0;
};

Eigen::VectorXd pi_star(const AmpTrace& tr);
Eigen::VectorXd varpi_star(const AmpTrace& tr);

OverlapParams overlap_params(const Eigen::VectorXd& J, const AmpTrace& tr, double eps_bar);
// Cheap path: only pi = r J / sqrt(N) and varpi = y J / N.
void pi_varpi(const double* J, const AmpTrace& tr, Eigen::VectorXd& pi, Eigen::VectorXd& varpi);

struct PairLambda {
  double lambda = 0;
  Eigen::VectorXd w;
};

PairLambda pair_lambda(const Eigen::VectorXd& J, const Eigen::VectorXd& K, const AmpTrace& tr);

// X(pi, varpi) in R^M.
Eigen::VectorXd psi_X(const Eigen::VectorXd& pi, const Eigen::VectorXd& varpi, const AmpTrace& tr,
                      double eps_bar);

double psi_functional(const ActivationSpec& spec, const Eigen::VectorXd& pi, const Eigen::VectorXd& varpi,
                      const AmpTrace& tr, double eps_bar);

struct PsiGradient {
  Eigen::VectorXd dpi, dvarpi;
};

PsiGradient psi_gradient(const ActivationSpec& spec, const Eigen::VectorXd& pi, const Eigen::VectorXd& varpi,
                         const AmpTrace& tr, double eps_bar);

// Ordered (pi, varpi), size (2t-1) square.
Eigen::MatrixXd psi_hessian(const ActivationSpec& spec, const Eigen::VectorXd& pi, const Eigen::VectorXd& varpi,
                            const AmpTrace& tr, double eps_bar);

double a2_functional(const ActivationSpec& spec, double lambda, const Eigen::VectorXd& zeta, const AmpTrace& tr,
                     double L_cap);
double a2_derivative0(const Eigen::VectorXd& zeta, const AmpTrace& tr);
// Psi(pi*, varpi*) - psi(1-q) + A2
double psi2(const ActivationSpec& spec, double lambda, const Eigen::VectorXd& zeta, const AmpTrace& tr,
            double L_cap);

// Gaussian zeta with the c-frame components removed, rescaled to the cap if needed.
Eigen::VectorXd admissible_zeta(const AmpTrace& tr, double L_cap, std::uint64_t seed);

// Draws from the product measure with P(J_i = +1) = (1 + tanh H^(t)_i)/2.
// Sample k uses its own RNG stream, so results do not depend on thread count.
void q_measure_for_each(const AmpTrace& tr, int n_samples, std::uint64_t seed,
                        const std::function<void(int, const std::vector<double>&)>& fn, bool parallel = true);
std::vector<std::vector<double>> q_measure_sample(const AmpTrace& tr, int n_samples, std::uint64_t seed);

struct FirstMomentEstimate {
  double estimate = 0;          // per-spin log estimate
  double log_cosh_term = 0;     // (1, log 2cosh H^(t)) / N
  double psi_star = 0;          // Psi(pi*, varpi*)
  double inside_fraction = 0;   // fraction of samples in N_o
  int neg_inf = 0;              // samples with vanishing mass
};

FirstMomentEstimate conditional_first_moment_estimate(const ActivationSpec& spec, const AmpTrace& tr, int n_samples,
                                                      double eps_bar, double radius, std::uint64_t seed,
                                                      bool parallel = true);

// Exact enumeration.
struct EnumerationResult {
  int N = 0, M = 0;
  std::uint64_t seed = 0;
  double logZ = 0;  // -inf when Z = 0
  bool zero = false;
  double logZ_truncated = 0;
  std::uint64_t count_feasible = 0;  // counting mode only
  bool counting = false;
  double per_config_max_weight = 0;  // max over J of sum_a log U
  double wall_time = 0;
};

inline constexpr double kTauTrunc = 6.14421235332821e-06;  // e^{-12}
inline constexpr int kEnumCap = 26;

struct EnumOptions {
  int cap = kEnumCap;
  int top_bits = -1;  // spins fixed per block; -1 picks a size-only default
  bool parallel = true;
  bool force_log = false;  // use log mode even for indicators
};

EnumerationResult enumerate_logZ(const ActivationSpec& spec, const RowMatrix& G, double tau_trunc = kTauTrunc,
                                 const EnumOptions& opts = {});

// log_A(x) = max(-A, log x)
inline double log_trunc(double A, double logx) { return logx < -A ? -A : logx; }

struct ExperimentRow {
  int N = 0, M = 0, samples = 0;
  double mean = 0, stderr_ = 0, rs_reference = 0, deviation = 0;
  int zero_events = 0;
  double rs_density = 0;  // RS at alpha = M/N
};

struct ExperimentOptions {
  double trunc_per_spin = 0.69314718055994531;  // truncation level A/N; log 2 keeps log max(Z,1)
  RsOptions rs;
  EnumOptions enumeration;
};

std::vector<ExperimentRow> free_energy_experiment(const ActivationSpec& spec, double alpha,
                                                  const std::vector<int>& Ns, int samples, std::uint64_t seed,
                                                  const ExperimentOptions& opts = {});

}  // namespace isp
