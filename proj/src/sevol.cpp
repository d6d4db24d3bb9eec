#include "isp/sevol.hpp"

#include <algorithm>
#include <cmath>

namespace isp {

namespace {

double clamp_unit(double v, const char* name, int s, double& max_clamp) {
  const double ex = std::abs(v) - 1.0;
  if (ex <= 0) return v;
  if (ex > 1e-9)
    throw NumericalError(std::string("state evolution: |") + name + "_" + std::to_string(s) +
                         "| exceeds 1 by " + fmt17(ex));
  max_clamp = std::max(max_clamp, ex);
  warn_once(std::string("state evolution: clamped |") + name + "| excess " + fmt17(ex));
  return v > 0 ? 1.0 : -1.0;
}

}  // namespace

std::pair<double, double> se_init(const ActivationSpec& spec, const RsSolution& sol, int order) {
  if (sol.q <= 0 || sol.psi <= 0) throw NumericalError("degenerate fixed point (annealed branch)");
  const QuadratureRule& rule = gauss_rule(order);
  const double sq = std::sqrt(sol.q);
  const double ef = expect_g([&](double z) { return F(spec, sol.q, sq * z); }, rule);
  return {0.0, std::sqrt(sol.alpha / sol.psi) * ef};
}

double se_rho(const RsSolution& sol, double mu, int order) {
  const QuadratureRule& rule = gauss_rule(order);
  const double sp = std::sqrt(sol.psi);
  const double nu = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  return expect_g2([&](double a, double b) { return std::tanh(sp * (mu * a + nu * b)) * std::tanh(sp * a); }, rule) /
         sol.q;
}

double se_mu(const ActivationSpec& spec, const RsSolution& sol, double rho, int order) {
  const QuadratureRule& rule = gauss_rule(order);
  const double sq = std::sqrt(sol.q);
  const double nu = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  // F at the second argument depends only on the row node; cache it.
  std::vector<double> fa(rule.order);
  for (int i = 0; i < rule.order; ++i) fa[i] = F(spec, sol.q, sq * rule.nodes[i]);
  std::vector<double> row(rule.order);
  ExceptionSlot slot;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rule.order; ++i) {
    slot.run([&] {
      double s = 0.0;
      const double a = rule.nodes[i];
      for (int j = 0; j < rule.order; ++j) s += rule.weights[j] * F(spec, sol.q, sq * (rho * a + nu * rule.nodes[j]));
      row[i] = rule.weights[i] * s * fa[i];
    });
  }
  slot.rethrow();
  double s = 0.0;
  for (double v : row) s += v;
  return sol.alpha / sol.psi * s;
}

std::pair<double, double> se_step(const ActivationSpec& spec, const RsSolution& sol, double mu_prev,
                                  double rho_prev, int order) {
  if (std::abs(mu_prev) > 1 || std::abs(rho_prev) > 1) throw UsageError("se_step needs |mu|, |rho| <= 1");
  return {se_rho(sol, mu_prev, order), se_mu(spec, sol, rho_prev, order)};
}

SeTrace se_run(const ActivationSpec& spec, const RsSolution& sol, int t_max, double eps_conv, int order) {
  if (t_max < 1) throw UsageError("t_max must be at least 1");
  SeTrace tr;
  tr.rho = {0.0};
  tr.mu = {0.0};
  tr.lambda = {0.0};
  tr.gamma = {0.0};
  tr.Gamma_cum = {0.0};
  tr.Lambda_cum = {0.0};
  auto [r1, m1] = se_init(spec, sol, order);
  double rho = r1, mu = clamp_unit(m1, "mu", 1, tr.max_clamp);
  for (int s = 1; s <= t_max; ++s) {
    const double Lp = tr.Lambda_cum[s - 1], Gp = tr.Gamma_cum[s - 1];
    if (Lp >= 1.0) throw NumericalError("state-evolution degeneracy at step " + std::to_string(s) + ": Lambda = " + fmt17(Lp));
    if (Gp >= 1.0) throw NumericalError("state-evolution degeneracy at step " + std::to_string(s) + ": Gamma = " + fmt17(Gp));
    const double lam = (rho - Lp) / std::sqrt(1.0 - Lp);
    const double gam = (mu - Gp) / std::sqrt(1.0 - Gp);
    tr.rho.push_back(rho);
    tr.mu.push_back(mu);
    tr.lambda.push_back(lam);
    tr.gamma.push_back(gam);
    tr.Lambda_cum.push_back(Lp + lam * lam);
    tr.Gamma_cum.push_back(Gp + gam * gam);
    tr.t = s;
    if (eps_conv > 0 && 1.0 - tr.Gamma_cum[s] < eps_conv && 1.0 - tr.Lambda_cum[s] < eps_conv) {
      tr.converged = true;
      break;
    }
    if (s == t_max) break;
    auto [rn, mn] = se_step(spec, sol, mu, rho, order);
    rho = clamp_unit(rn, "rho", s + 1, tr.max_clamp);
    mu = clamp_unit(mn, "mu", s + 1, tr.max_clamp);
  }
  if (tr.t >= 2) tr.Gamma_mat = gamma_matrix(tr, tr.t);
  else tr.Gamma_mat = Eigen::MatrixXd::Ones(1, 1);
  tr.Lambda_mat = lambda_matrix(tr, tr.t);
  return tr;
}

Eigen::MatrixXd gamma_matrix(const SeTrace& se, int t) {
  const int n = t - 1;
  if (n < 1 || se.t < n - 1) throw UsageError("state-evolution trace too short for Gamma");
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k <= n; ++k) {
    for (int j = 1; j < k; ++j) G(k - 1, j - 1) = se.gamma[j];
    G(k - 1, k - 1) = std::sqrt(1.0 - se.Gamma_cum[k - 1]);
  }
  return G;
}

Eigen::MatrixXd lambda_matrix(const SeTrace& se, int t) {
  if (t < 1 || se.t < t - 1) throw UsageError("state-evolution trace too short for Lambda");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(t, t);
  for (int k = 1; k <= t; ++k) {
    for (int j = 1; j < k; ++j) L(k - 1, j - 1) = se.lambda[j];
    L(k - 1, k - 1) = std::sqrt(1.0 - se.Lambda_cum[k - 1]);
  }
  return L;
}

}  // namespace isp
