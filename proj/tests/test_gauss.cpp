#include <doctest.h>

#include <cmath>

#include "isp/gauss.hpp"
#include "oracles.hpp"

using namespace isp;

TEST_CASE("rule normalization and symmetry") {
  for (int order : {21, 51, 201}) {
    const auto& r = gauss_rule(order);
    REQUIRE(r.order == order);
    double s = 0, odd = 0;
    for (int i = 0; i < order; ++i) {
      s += r.weights[i];
      CHECK(r.weights[i] > 0);
      CHECK(r.nodes[i] == doctest::Approx(-r.nodes[order - 1 - i]).epsilon(1e-14));
      odd += r.weights[i] * r.nodes[i] * r.nodes[i] * r.nodes[i];
    }
    CHECK(std::abs(s - 1) < 1e-12);
    CHECK(std::abs(odd) < 1e-12);
    CHECK(std::abs(expect_g([](double z) { return z * z; }, r) - 1) < 1e-10);
    CHECK(std::abs(expect_g([](double z) { return z * z * z * z; }, r) - 3) < 1e-10);
  }
}

TEST_CASE("moments 0..8 and polynomial exactness") {
  const auto& r = gauss_rule();
  for (int k = 0; k <= 8; ++k)
    CHECK(std::abs(expect_g([k](double z) { return std::pow(z, k); }, r) - gaussian_moment(k)) < 1e-10);
  // degree 2n-1 exactness on a small rule, where the moments stay representable
  const auto& r11 = gauss_rule(11);
  for (int k = 0; k <= 21; ++k) {
    const double want = gaussian_moment(k);
    const double scale = expect_g([k](double z) { return std::pow(std::abs(z), k); }, r11);
    CHECK(std::abs(expect_g([k](double z) { return std::pow(z, k); }, r11) - want) <= 1e-10 * std::max(1.0, scale));
  }
}

TEST_CASE("expect_g rejects non-finite integrands") {
  CHECK_THROWS_WITH_AS(expect_g([](double z) { return z > 0 ? INFINITY : 0.0; }, gauss_rule(21)),
                       "non-finite integrand", NumericalError);
}

TEST_CASE("two-dimensional expectations") {
  const auto& r = gauss_rule(51);
  CHECK(expect_g2([](double a, double b) { return (a - b) * (a - b); }, r) == doctest::Approx(2).epsilon(1e-12));
  CHECK(std::abs(expect_g2([](double a, double b) { return a * b; }, r)) < 1e-13);
  CHECK(expect_g2([](double, double) { return 1.0; }, r) == doctest::Approx(1).epsilon(1e-13));
}

TEST_CASE("interval moments against the trapezoid oracle") {
  double out[9];
  interval_moments(-0.7, 1.3, 8, out);
  for (int k = 0; k <= 8; ++k) {
    const double ref = oracle::trapz_on([k](double z) { return std::pow(z, k); }, -0.7, 1.3);
    CHECK(std::abs(out[k] - ref) < 1e-10);
  }
  interval_moments(0.0, INFINITY, 4, out);
  CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(oracle::phi(0)).epsilon(1e-15));
  CHECK(out[2] == doctest::Approx(0.5).epsilon(1e-14));
  // far tail keeps relative accuracy
  interval_moments(12.0, INFINITY, 0, out);
  CHECK(out[0] == doctest::Approx(0.5 * std::erfc(12 / std::sqrt(2.0))).epsilon(1e-12));
  double ab[5];
  interval_abs_moments(-INFINITY, INFINITY, 4, ab);
  CHECK(ab[1] == doctest::Approx(std::sqrt(2 / M_PI)).epsilon(1e-14));
  CHECK(ab[3] == doctest::Approx(2 * std::sqrt(2 / M_PI)).epsilon(1e-14));
}

TEST_CASE("adaptive Simpson integrates kinked integrands") {
  double out[2];
  adaptive_simpson(
      [](double z, double* o) {
        o[0] = std::abs(z) * oracle::phi(z);
        o[1] = (z > 0.3 ? 1.0 : 0.0) * oracle::phi(z);
      },
      2, {-10.0, 0.0, 0.3, 10.0}, 1e-12, out);
  CHECK(out[0] == doctest::Approx(std::sqrt(2 / M_PI)).epsilon(1e-10));
  CHECK(out[1] == doctest::Approx(oracle::Phi(-0.3)).epsilon(1e-10));
}
