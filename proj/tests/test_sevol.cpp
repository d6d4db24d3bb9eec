#include <doctest.h>

#include <cmath>

#include "isp/error.hpp"
#include "isp/sevol.hpp"
#include "oracles.hpp"

using namespace isp;

namespace {
const RsSolution& hs_sol() {
  static const RsSolution s = solve_fixed_point(halfspace(0), 0.01);
  return s;
}
}  // namespace

TEST_CASE("initial step") {
  const auto& s = hs_sol();
  auto [r1, m1] = se_init(halfspace(0), s);
  CHECK(r1 == 0.0);
  const double ef = oracle::trapz([&](double z) { return oracle::hs_F(0, s.q, std::sqrt(s.q) * z); });
  const double want = std::sqrt(s.alpha / s.psi) * ef;
  CHECK(m1 == doctest::Approx(want).epsilon(1e-10));
  CHECK(m1 == doctest::Approx(0.99797304053752689).epsilon(1e-9));
}

TEST_CASE("rho and mu maps") {
  const auto& s = hs_sol();
  const auto spec = halfspace(0);
  CHECK(se_rho(s, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(se_mu(spec, s, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(se_rho(s, 0.0)) < 1e-14);
  const auto m1 = se_init(spec, s).second;
  CHECK(se_mu(spec, s, 0.0) == doctest::Approx(m1 * m1).epsilon(1e-12));
  const double c = std::sqrt(1 - 0.25);
  const double mu_half = s.alpha / s.psi * oracle::trapz2([&](double a, double b) {
    return oracle::hs_F(0, s.q, std::sqrt(s.q) * a) * oracle::hs_F(0, s.q, std::sqrt(s.q) * (0.5 * a + c * b));
  });
  CHECK(se_mu(spec, s, 0.5) == doctest::Approx(mu_half).epsilon(1e-8));
  CHECK(se_mu(spec, s, 0.5) == doctest::Approx(0.99797471408518645).epsilon(1e-8));
  const double rho_half = oracle::trapz2([&](double a, double b) {
    const double sp = std::sqrt(s.psi);
    return std::tanh(sp * a) * std::tanh(sp * (0.5 * a + c * b));
  }) / s.q;
  CHECK(se_rho(s, 0.5) == doctest::Approx(rho_half).epsilon(1e-8));
  CHECK_THROWS_AS(se_step(spec, s, 1.5, 0.0), UsageError);
}

TEST_CASE("trace structure") {
  const auto& s = hs_sol();
  const auto tr = se_run(halfspace(0), s, 8, 0.0);
  CHECK(tr.t == 8);
  CHECK(tr.rho[1] == 0.0);
  CHECK(tr.lambda[1] == 0.0);
  for (int k = 2; k <= tr.t; ++k) {
    CHECK(std::abs(tr.rho[k]) <= 1.0);
    CHECK(std::abs(tr.mu[k]) <= 1.0);
    CHECK(tr.Gamma_cum[k] >= tr.Gamma_cum[k - 1]);
    CHECK(tr.Lambda_cum[k] >= tr.Lambda_cum[k - 1]);
    CHECK(tr.Gamma_cum[k] < 1.0);
  }
  const Eigen::MatrixXd L = tr.Lambda_mat;
  const Eigen::MatrixXd LL = L * L.transpose();
  for (int i = 0; i < tr.t; ++i)
    for (int j = 0; j < tr.t; ++j) {
      const double want = i == j ? 1.0 : tr.rho[std::min(i, j) + 1];
      CHECK(LL(i, j) == doctest::Approx(want).epsilon(1e-12));
    }
  const Eigen::MatrixXd G = tr.Gamma_mat;
  const Eigen::MatrixXd GG = G * G.transpose();
  for (int i = 0; i < G.rows(); ++i)
    for (int j = 0; j < G.rows(); ++j) {
      const double want = i == j ? 1.0 : tr.mu[std::min(i, j) + 1];
      CHECK(GG(i, j) == doctest::Approx(want).epsilon(1e-12));
    }
  CHECK(gamma_matrix(tr, 4).rows() == 3);
  CHECK(lambda_matrix(tr, 4) == L.topLeftCorner(4, 4));
  CHECK_THROWS_AS(lambda_matrix(tr, 20), UsageError);
}

TEST_CASE("convergence and the geometric rate") {
  const auto& s = hs_sol();
  const auto tr = se_run(halfspace(0), s, 200, 1e-8);
  CHECK(tr.converged);
  CHECK(tr.t < 200);
  // rho and mu alternate, so the gap to one closes in pairs of steps
  const double at = at_condition(halfspace(0), s.alpha, s);
  int seen = 0;
  for (int k = 1; k + 2 <= tr.t; k += 2) {
    const double ratio = (1 - tr.Gamma_cum[k + 2]) / (1 - tr.Gamma_cum[k]);
    CHECK(ratio <= at + 0.1);
    ++seen;
  }
  CHECK(seen >= 2);
  CHECK(1 - tr.Gamma_cum[tr.t] < 1e-8);
}

TEST_CASE("short traces") {
  const auto tr = se_run(halfspace(0), hs_sol(), 1, 0.0);
  CHECK(tr.t == 1);
  CHECK(tr.Lambda_mat.rows() == 1);
  CHECK(tr.Lambda_mat(0, 0) == 1.0);
  CHECK(tr.Gamma_mat(0, 0) == 1.0);
  CHECK_THROWS_AS(se_run(halfspace(0), hs_sol(), 0), UsageError);
}

TEST_CASE("annealed branch is rejected") {
  const auto b = solve_fixed_point(band(-1, 1), 0.05);
  CHECK_THROWS_AS(se_run(band(-1, 1), b), NumericalError);
}
