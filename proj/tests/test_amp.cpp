#include <doctest.h>

#include <cmath>
#include <map>

#include "isp/amp.hpp"
#include "isp/error.hpp"
#include "isp/moments.hpp"
#include "oracles.hpp"

using namespace isp;

namespace {

struct Setup {
  ActivationSpec spec = halfspace(0);
  RsSolution sol;
  SeTrace se;
  Setup() {
    sol = solve_fixed_point(spec, 0.01);
    se = se_run(spec, sol, 12, 0.0);
  }
};

const Setup& setup() {
  static const Setup s;
  return s;
}

const AmpTrace& desk_trace() {
  static const AmpTrace tr = amp_run(setup().spec, setup().sol, setup().se, 4000, 6, 1);
  return tr;
}

double find(const std::vector<DevRow>& rows, const std::string& q) {
  for (const auto& r : rows)
    if (r.quantity == q) return r.abs_dev;
  FAIL("missing row " << q);
  return NAN;
}

}  // namespace

TEST_CASE("initialization and first step") {
  const auto& s = setup();
  const auto tr = amp_run(s.spec, s.sol, s.se, 200, 3, 7);
  CHECK(tr.M == 2);
  CHECK(tr.m[0].isZero());
  CHECK(tr.n[0].isZero());
  CHECK((tr.m[1].array() == std::sqrt(s.sol.q)).all());
  CHECK((tr.n[1].array() == std::sqrt(s.sol.psi / s.sol.alpha)).all());
  const Eigen::VectorXd H2 = tr.G.transpose() * tr.n[1] / std::sqrt(200.0);
  CHECK((tr.H[2] - H2).cwiseAbs().maxCoeff() < 1e-13);
  const Eigen::VectorXd h2 = tr.G * tr.m[1] / std::sqrt(200.0);
  CHECK((tr.h[2] - h2).cwiseAbs().maxCoeff() < 1e-13);
  // later steps carry the Onsager corrections
  const Eigen::VectorXd H3 = tr.G.transpose() * tr.n[2] / std::sqrt(200.0) - s.sol.beta * tr.m[1];
  CHECK((tr.H[3] - H3).cwiseAbs().maxCoeff() < 1e-13);
  const Eigen::VectorXd h3 = tr.G * tr.m[2] / std::sqrt(200.0) - (1 - s.sol.q) * tr.n[1];
  CHECK((tr.h[3] - h3).cwiseAbs().maxCoeff() < 1e-8);
  for (int k = 1; k <= 4; ++k) CHECK(tr.m[k].cwiseAbs().maxCoeff() < 1.0);
  for (int k = 2; k <= 4; ++k)
    for (int a = 0; a < tr.M; ++a) CHECK(tr.n[k][a] == doctest::Approx(oracle::hs_F(0, s.sol.q, tr.h[k][a])).epsilon(1e-9));
  CHECK(tr.sampler == std::string(kSamplerId));
}

TEST_CASE("preconditions") {
  const auto& s = setup();
  CHECK_THROWS_AS(amp_run(s.spec, s.sol, s.se, 8, 3, 1), UsageError);
  CHECK_THROWS_AS(amp_run(s.spec, s.sol, s.se, 20, 3, 1), UsageError);  // M rounds to 0
  RsSolution bad = s.sol;
  bad.converged = false;
  CHECK_THROWS_AS(amp_run(s.spec, bad, s.se, 400, 3, 1), UsageError);
}

TEST_CASE("determinism and serial vs parallel") {
  const auto& s = setup();
  AmpOptions ser;
  ser.parallel = false;
  const auto a = amp_run(s.spec, s.sol, s.se, 1000, 5, 3);
  const auto b = amp_run(s.spec, s.sol, s.se, 1000, 5, 3, ser);
  const auto c = amp_run(s.spec, s.sol, s.se, 1000, 5, 4);
  CHECK(a.G == b.G);
  for (int k = 1; k <= 6; ++k) {
    CHECK(a.m[k] == b.m[k]);
    CHECK(a.n[k] == b.n[k]);
  }
  CHECK(a.Lambda_N == b.Lambda_N);
  CHECK(a.G != c.G);
}

TEST_CASE("frames and reconstruction") {
  const auto& tr = desk_trace();
  const int t = tr.t;
  CHECK((tr.r * tr.r.transpose() - Eigen::MatrixXd::Identity(t, t)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((tr.c * tr.c.transpose() - Eigen::MatrixXd::Identity(t - 1, t - 1)).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXd mr = tr.m_stack(t) / std::sqrt(tr.N * tr.q) - tr.Lambda_N * tr.r;
  CHECK(mr.cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd nc = tr.n_stack(t - 1) / std::sqrt(tr.N * tr.psi) - tr.Gamma_N * tr.c;
  CHECK(nc.cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < t; ++i) {
    CHECK(tr.Lambda_N(i, i) > 0);
    for (int j = i + 1; j < t; ++j) CHECK(tr.Lambda_N(i, j) == 0.0);
  }
  // whitening inverts the theoretical matrices
  const Eigen::MatrixXd back = tr.Lambda * tr.x * std::sqrt(tr.q) - tr.h_stack();
  CHECK(back.cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXd backy = tr.Gamma * tr.y * std::sqrt(tr.psi) - tr.H_stack();
  CHECK(backy.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("collinear iterates are reported") {
  Eigen::MatrixXd rows(2, 5);
  rows << 1, 2, 3, 4, 5, 2, 4, 6, 8, 10;
  Eigen::MatrixXd f, c;
  CHECK_THROWS_WITH_AS(gram_schmidt(rows, 1.0, 5, f, c), doctest::Contains("iterate collinearity at step 2"),
                       NumericalError);
  rows(1, 0) = 0;
  gram_schmidt(rows, 2.0, 5, f, c);
  CHECK((c * f * 2.0 - rows).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("state evolution agreement at the desk scale") {
  const auto& s = setup();
  const auto& tr = desk_trace();
  const auto rows = se_check(tr, s.se, s.sol);
  for (int k = 2; k <= tr.t; ++k) CHECK(find(rows, "m_norm[" + std::to_string(k) + "]") <= 0.05);
  for (int k = 2; k <= tr.t; ++k) CHECK(find(rows, "n_norm[" + std::to_string(k) + "]") <= 0.08);
  double lam = 0, gam = 0, nov = 0, my1 = 0, ym = 0, xc = 0;
  for (const auto& r : rows) {
    if (r.quantity.rfind("Lambda_N", 0) == 0) lam = std::max(lam, r.abs_dev);
    if (r.quantity.rfind("Gamma_N", 0) == 0) gam = std::max(gam, r.abs_dev);
    if (r.quantity.rfind("n_overlap", 0) == 0) nov = std::max(nov, r.abs_dev);
    if (r.quantity.rfind("m_dot_y[", 0) == 0 && r.quantity.find(",1]") != std::string::npos)
      my1 = std::max(my1, r.abs_dev);
    if (r.quantity.rfind("y_mean", 0) == 0) ym = std::max(ym, r.abs_dev);
    if (r.quantity.rfind("x_cov", 0) == 0) xc = std::max(xc, r.abs_dev);
  }
  CHECK(lam <= 0.08);
  CHECK(gam <= 0.08);
  CHECK(nov <= 0.08);
  CHECK(my1 <= 5.0 / std::sqrt(double(tr.N)));
  CHECK(ym <= 5.0 / std::sqrt(double(tr.N)));
  // x has only M coordinates per row
  CHECK(xc <= 5.0 / std::sqrt(double(tr.M)));
  CHECK(std::isnan(find(rows, "varsigma_t")));
}

TEST_CASE("condition_project") {
  RowMatrix G = gaussian_matrix(4, 6, 11);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(6), c = Eigen::VectorXd::Zero(4);
  r[0] = 1;
  c[0] = 1;
  const RowMatrix P = condition_project(G, r, c);
  for (int a = 0; a < 4; ++a)
    for (int i = 0; i < 6; ++i) {
      const double want = (a == 0 || i == 0) ? G(a, i) : 0.0;
      CHECK(P(a, i) == doctest::Approx(want).epsilon(1e-15));
    }
  Engine eng = make_engine(5);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 6; ++i) r[i] = nd(eng);
  for (int a = 0; a < 4; ++a) c[a] = nd(eng);
  r.normalize();
  c.normalize();
  const RowMatrix Q = condition_project(G, r, c);
  CHECK((Q * r - G * r).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((Q.transpose() * c - G.transpose() * c).cwiseAbs().maxCoeff() < 1e-13);
  const Eigen::MatrixXd Gd = G;
  CHECK((oracle::conditional_mean(Gd, r, c) - Eigen::MatrixXd(Q)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_WITH_AS(condition_project(G, 2 * r, c), doctest::Contains("unit vectors"), UsageError);
}

TEST_CASE("conditional mean by Monte Carlo") {
  const int M = 3, N = 4, n = 100000;
  const RowMatrix G0 = gaussian_matrix(M, N, 21);
  Engine eng = make_engine(22);
  std::normal_distribution<double> nd;
  Eigen::VectorXd r(N), c(M);
  for (int i = 0; i < N; ++i) r[i] = nd(eng);
  for (int a = 0; a < M; ++a) c[a] = nd(eng);
  r.normalize();
  c.normalize();
  // Matheron: fresh G plus the correction matching the observed (G r, G^T c), projector from the oracle
  Eigen::MatrixXd P(M * N, M * N);
  for (int k = 0; k < M * N; ++k) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(M, N);
    E(k % M, k / M) = 1;
    const Eigen::MatrixXd pe = oracle::conditional_mean(E, r, c);
    P.col(k) = Eigen::Map<const Eigen::VectorXd>(pe.data(), M * N);
  }
  const Eigen::MatrixXd G0d = G0;
  const Eigen::VectorXd g0 = Eigen::Map<const Eigen::VectorXd>(G0d.data(), M * N);
  const Eigen::VectorXd pg0 = P * g0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(M * N), s2 = Eigen::VectorXd::Zero(M * N), g(M * N);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < M * N; ++j) g[j] = nd(eng);
    const Eigen::VectorXd smp = g - P * g + pg0;
    s1 += smp;
    s2 += smp.cwiseProduct(smp);
  }
  const Eigen::VectorXd mean = s1 / n;
  const Eigen::VectorXd se = ((s2 / n - mean.cwiseProduct(mean)).cwiseMax(0.0) / n).cwiseSqrt();
  const RowMatrix Q = condition_project(G0, r, c);
  for (int k = 0; k < M * N; ++k) {
    const double want = Q(k % M, k / M);
    CHECK(std::abs(mean[k] - want) <= 4 * se[k] + 1e-12);
  }
}

TEST_CASE("resampling after conditioning") {
  const auto& s = setup();
  const auto tr = amp_run(s.spec, s.sol, s.se, 1000, 4, 9);
  const auto rep = resample_check(tr, 100000, 3);
  CHECK(rep.max_row_residual < 1e-8);
  CHECK(rep.max_col_residual < 1e-8);
  CHECK(rep.tolerance == doctest::Approx(5.0 / std::sqrt(1e5)));
  CHECK(std::abs(rep.second_moment - 1.0) <= rep.tolerance);
}

TEST_CASE("Sigma for the constant activation") {
  const auto& tr = desk_trace();
  Eigen::VectorXd J(tr.N);
  Engine eng = make_engine(8);
  for (int i = 0; i < tr.N; ++i) J[i] = (eng() & 1) ? 1.0 : -1.0;
  const Eigen::MatrixXd S = sigma_cov(constant_one(), tr, J, Eigen::VectorXd::Zero(tr.t - 1));
  const Eigen::MatrixXd nst = tr.n_stack(tr.t - 1);
  CHECK((S - nst * nst.transpose() / tr.N).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXd GG = tr.psi * tr.Gamma_N * tr.Gamma_N.transpose();
  CHECK((S - GG).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((S - S.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::VectorXd Jbig = tr.m[tr.t] / tr.m[tr.t].cwiseAbs().maxCoeff();
  Jbig = Jbig.array().sign().matrix();
  CHECK_THROWS_AS(sigma_cov(constant_one(), tr, Jbig, Eigen::VectorXd()), UsageError);
}

TEST_CASE("local CLT at covariance level") {
  const auto& s = setup();
  const auto tr = amp_run(s.spec, s.sol, s.se, 2000, 4, 5);
  Eigen::VectorXd J(tr.N);
  Engine eng = make_engine(6);
  for (int i = 0; i < tr.N; ++i) J[i] = (eng() & 1) ? 1.0 : -1.0;
  const auto rep = clt_cov_check(s.spec, tr, J, Eigen::VectorXd::Zero(tr.t - 1), 100000, 7);
  CHECK(rep.skipped == 0);
  CHECK(rep.max_abs_dev <= 0.05);
  CHECK(rep.iota_min > 0);
  CHECK(rep.iota_max < 1 / rep.iota_min);
  const auto again = clt_cov_check(s.spec, tr, J, Eigen::VectorXd::Zero(tr.t - 1), 100000, 7);
  CHECK(again.empirical == rep.empirical);
}
