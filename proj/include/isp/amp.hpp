#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isp/sevol.hpp"
#include "isp/util.hpp"

namespace isp {

// One AMP run. Iterates are indexed by s as in the recursion: m[0] = n[0] = 0,
// m[1], n[1] are the initial values, H[s], h[s] exist for s >= 2.
struct AmpTrace {
  int N = 0, M = 0, t = 0;
  std::uint64_t seed = 0;
  std::string sampler;
  double alpha = 0, q = 0, psi = 0, beta = 0, beta_acute = 1;
  RowMatrix G;  // M x N
  std::vector<Eigen::VectorXd> m, n, H, h;  // s = 0..t+1
  Eigen::MatrixXd r;         // t x N, orthonormal rows
  Eigen::MatrixXd c;         // (t-1) x M
  Eigen::MatrixXd Lambda_N;  // t x t
  Eigen::MatrixXd Gamma_N;   // (t-1) x (t-1)
  Eigen::MatrixXd Lambda;    // theoretical, t x t
  Eigen::MatrixXd Gamma;     // theoretical, (t-1) x (t-1)
  Eigen::MatrixXd x;         // t x M whitened h
  Eigen::MatrixXd y;         // (t-1) x N whitened H

  // Stacks with iterates as rows.
  Eigen::MatrixXd m_stack(int s) const;      // m^(1..s)
  Eigen::MatrixXd n_stack(int s) const;      // n^(1..s)
  Eigen::MatrixXd h_stack() const;           // h^(2..t+1)
  Eigen::MatrixXd H_stack() const;           // H^(2..t)
};

struct AmpOptions {
  bool parallel = true;
  int quad_order = 201;
};

// Runs t iterations on a fresh seeded G; se must cover at least t steps.
AmpTrace amp_run(const ActivationSpec& spec, const RsSolution& sol, const SeTrace& se, int N, int t,
                 std::uint64_t seed, const AmpOptions& opts = {});
// Same on a supplied disorder matrix.
AmpTrace amp_run_on(const ActivationSpec& spec, const RsSolution& sol, const SeTrace& se, RowMatrix G, int t,
                    std::uint64_t seed, const AmpOptions& opts = {});

// Modified Gram-Schmidt with one reorthogonalization pass. rows/scale = coef * frame.
// Throws when a pivot falls below 1e-10 sqrt(pivot_ref).
void gram_schmidt(const Eigen::MatrixXd& rows, double scale, double pivot_ref, Eigen::MatrixXd& frame,
                  Eigen::MatrixXd& coef);

struct DevRow {
  std::string quantity;
  double predicted, empirical, abs_dev;
};

std::vector<DevRow> se_check(const AmpTrace& tr, const SeTrace& se, const RsSolution& sol);

// (G r) r^T + c (G^T c)^T - (c^T G r) c r^T
RowMatrix condition_project(const RowMatrix& G, const Eigen::VectorXd& r, const Eigen::VectorXd& c);

// G minus the successive conditional projections on the trace frames.
RowMatrix residual_after_conditioning(const AmpTrace& tr);

struct ResampleReport {
  double max_row_residual = 0;  // max_s |res r^(s)|
  double max_col_residual = 0;  // max_s |res^T c^(s)|
  double second_moment = 0;     // mean (u^T res v)^2 over random test directions
  double tolerance = 0;         // 5 / sqrt(samples)
  int samples = 0;
};

ResampleReport resample_check(const AmpTrace& tr, int n_samples, std::uint64_t seed);

// Local-CLT covariance of W at configuration J and shift tau (zero by default).
Eigen::MatrixXd sigma_cov(const ActivationSpec& spec, const AmpTrace& tr, const Eigen::VectorXd& J,
                          const Eigen::VectorXd& tau);

struct CltReport {
  Eigen::MatrixXd sigma, empirical;
  double max_abs_dev = 0;
  int skipped = 0;
  double iota_min = 0, iota_max = 0;  // eigenvalue range of Sigma
};

CltReport clt_cov_check(const ActivationSpec& spec, const AmpTrace& tr, const Eigen::VectorXd& J,
                        const Eigen::VectorXd& tau, int n_samples, std::uint64_t seed);

}  // namespace isp
