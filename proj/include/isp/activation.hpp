#pragma once

#include <string>
#include <vector>

#include "isp/gauss.hpp"

namespace isp {

enum class Kind { halfspace, band, gauss_bump, clipped_exp, tabulated };

// Activation U : R -> [0,1] with its metadata. Parameters p1, p2 are
// kappa | (lo, hi) | (mean, sigma) | lambda depending on the kind.
struct ActivationSpec {
  Kind kind = Kind::halfspace;
  double p1 = 0.0;
  double p2 = 0.0;
  std::vector<double> xs, us;  // tabulated grid
  double eta = 0.0;            // smoothing width
  double delta_prime = 0.5;
  double e_max = 1.0;          // E(U) is inside [-e_max, e_max]
  bool closed_form = true;
  int quad_order = 201;

  std::string describe() const;
};

ActivationSpec halfspace(double kappa);
ActivationSpec band(double lo, double hi);
ActivationSpec gauss_bump(double mean, double sigma);
ActivationSpec clipped_exp(double lambda);
ActivationSpec tabulated(std::vector<double> xs, std::vector<double> us);
ActivationSpec constant_one();
ActivationSpec load_tabulated(const std::string& path);
ActivationSpec smooth(ActivationSpec spec, double eta);

// "halfspace:0", "band:-1,1", "gauss_bump:1,1", "clipped_exp:2", "tabulated:FILE", "one".
ActivationSpec parse_activation(const std::string& text);

// Assumption checks on a sampled grid; throws UsageError on violation.
void validate(const ActivationSpec& spec);

double eval_U(const ActivationSpec& spec, double x);
double mean_score(const ActivationSpec& spec);

// Mass floor used for this spec.
double mass_floor(const ActivationSpec& spec);

// out[k] = E xi^k U(x + c xi), k = 0..pmax (pmax <= 12).
void raw_moments(const ActivationSpec& spec, double x, double c, int pmax, double* out);
// out[k] = E |xi|^k U(x + c xi).
void raw_abs_moments(const ActivationSpec& spec, double x, double c, int pmax, double* out);

struct Tilt {
  double mass = 0.0;
  double m[9] = {};  // E_{x,c} Z^k
};

// Tilted moments up to pmax <= 8; throws VanishingMass below the floor.
Tilt tilt(const ActivationSpec& spec, double x, double c, int pmax);
double tilted_moment(const ActivationSpec& spec, double x, double c, int p);

double L(const ActivationSpec& spec, double q, double x);
double F(const ActivationSpec& spec, double q, double x);
double F_prime(const ActivationSpec& spec, double q, double x);

struct HessIngredients {
  double A, B, a, b;
};

HessIngredients hess_ingredients(const ActivationSpec& spec, double x, double c);

// l(x,c) = log E U(x + c xi) together with its first and second partials.
struct EllDerivs {
  double l, lx, lc, lxx, lxc, lcc;
};
EllDerivs ell_derivs(const ActivationSpec& spec, double x, double c);

enum class ConstMode { empirical, proof };

struct GridConfig {
  double x_max = 6.0;
  double x_step = 0.5;
  double c_lo = 0.5, c_hi = 2.0, c_step = 0.1;
  double cp_lo = 0.4, cp_hi = 7.0 / 3.0;
  int p_max = 8;
  double abs_c0 = 5.0;  // c0 of the moment bound
  double abs_c1 = 1.0;  // c1 of the alpha threshold
};

struct ConstantsReport {
  double c1_empirical = 0, k2_empirical = 0, k2_prime_empirical = 0;
  double cbar1 = 0, k0 = 0;
  double c1_proof = 0, c1_proof_log10 = 0;
  bool c1_proof_overflow = false;
  double alpha_threshold = 0, alpha_prime_threshold = 0;
  double alpha_threshold_log10 = 0, alpha_prime_threshold_log10 = 0;
  double c0 = 5, c1 = 1;
  ConstMode mode = ConstMode::empirical;
  int skipped = 0;
};

std::vector<double> c_grid(double lo, double hi, double step);
std::vector<double> k2_prime_c_grid(const GridConfig& g);
std::vector<double> x_grid(const GridConfig& g);

// 2 Var_{x,c}(Z): the K2 ratio at one point.
double k2_ratio(const ActivationSpec& spec, double x, double c);

ConstantsReport estimate_constants(const ActivationSpec& spec, const GridConfig& grid, ConstMode mode);

}  // namespace isp
