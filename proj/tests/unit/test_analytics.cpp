#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "polyct/analytics.hpp"
#include "polyct/error.hpp"

using namespace polyct;
using namespace polyct::analytics;
using doctest::Approx;

namespace {
const double kPi = std::acos(-1.0);
double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }
}  // namespace

TEST_CASE("erfc values") {
  CHECK(analytics::erfc(0.0) == 1.0);
  for (double t : {0.3, 1.7}) CHECK(analytics::erfc(t) == Approx(2.0 - analytics::erfc(-t)).epsilon(1e-15));
  CHECK(analytics::erfc(1.0 / std::sqrt(2.0)) == Approx(0.317310).epsilon(1e-6));
  for (double t : {0.1, 0.9, 2.5, 5.0}) CHECK(rel(analytics::erfc(t), oracle::erfc(t)) < 1e-12);
}

TEST_CASE("erfcx stays finite and matches the product form") {
  for (double t : {0.0, 0.5, 2.0, 8.0}) {
    CHECK(rel(erfcx(t), std::exp(t * t) * std::erfc(t)) < 1e-12);
  }
  for (double t : {30.0, 1e3, 1e8}) {
    // Asymptote 1 / (t sqrt pi) (1 - 1/(2 t^2)).
    const double asym = 1.0 / (t * std::sqrt(kPi)) * (1.0 - 0.5 / (t * t));
    CHECK(std::isfinite(erfcx(t)));
    CHECK(rel(erfcx(t), asym) < 1e-5);
  }
}

TEST_CASE("exp_pos_moment") {
  CHECK(exp_pos_moment(0.0) == 0.5);
  CHECK(exp_pos_moment(1.0) == Approx(0.261578).epsilon(1e-6));
  const double at50 = exp_pos_moment(50.0);
  CHECK(at50 > 0.0);
  CHECK(rel(at50, oracle::exp_pos_moment(50.0)) < 1e-10);
}

TEST_CASE("exp_plus_moment") {
  CHECK(exp_plus_moment(0.0) == Approx(1.0 / std::sqrt(2.0 * kPi)).epsilon(1e-15));
  CHECK(rel(exp_plus_moment(1.0), oracle::exp_plus_moment(1.0)) < 1e-10);
  CHECK(rel(exp_plus_moment(10.0), oracle::exp_plus_moment(10.0)) < 1e-10);
  // Large-c tail phi(0) / c^2.
  CHECK(rel(exp_plus_moment(1e6), 1.0 / (std::sqrt(2.0 * kPi) * 1e12)) < 1e-5);
}

TEST_CASE("expected_loss_at_zero") {
  CHECK(expected_loss_at_zero(0.0) == 0.0);
  CHECK(expected_loss_at_zero(1.0) >= 0.235);
  CHECK(std::abs(expected_loss_at_zero(1e6) - 0.5) <= 1e-6);
  double prev = 0.0;
  for (double r = 0.25; r < 20.0; r += 0.25) {
    const double v = expected_loss_at_zero(r);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("theory constants") {
  const auto c = theory_constants(1.0, 128, 512);
  CHECK(c.mu == Approx(1.0 / (4.0 * std::sqrt(kPi) * (1.0 + 9.0 * kPi))).epsilon(1e-14));
  CHECK(c.lip == Approx(2.0).epsilon(1e-15));
  CHECK(c.eta == Approx(c.mu / c.lip).epsilon(1e-15));
  CHECK(kappa_bound(1.0) == Approx(415.1).epsilon(2e-4));
  CHECK(theory_constants(1.0, 64, 64).kappa == Approx(kappa_bound(1.0)));
  CHECK(c.kappa >= c.lip / c.mu * (1.0 - 1e-12));

  const auto c2 = theory_constants(2.0, 128, 2048);
  const double rho = c2.eta * std::pow(c2.mu / c2.lip, 2);
  const double rho_bar = rho / (80.0 * std::sqrt(kPi));
  CHECK(c2.rho == Approx(rho).epsilon(1e-14));
  CHECK(c2.rho_bar == Approx(rho_bar).epsilon(1e-14));
  CHECK(c2.t0 == static_cast<std::int64_t>(std::ceil(std::log(2.0) / rho_bar)));

  CHECK_THROWS_AS(theory_constants(0.5, 8, 8), polyct::Error);
  CHECK_THROWS_AS(theory_constants(1.0, 8, 4), polyct::Error);
}

TEST_CASE("gradient descent stepsize schedule") {
  const auto s0 = gd_stepsize_schedule(0.0, 1.0);
  CHECK(s0(0) == Approx(4.0).epsilon(1e-15));
  CHECK(s0(1) == Approx(1.0).epsilon(1e-15));
  const auto s1 = gd_stepsize_schedule(1.0, 1.0);
  CHECK(s1(1) == Approx(6.7379e-3).epsilon(1e-4));
  CHECK(s1(7) == s1(1));
  const double eta0 = 4.0 * std::exp(-0.5) / oracle::erfc(1.0 / std::sqrt(2.0));
  CHECK(rel(s1(0), eta0) < 1e-12);
  CHECK(s1(0) == Approx(7.648).epsilon(1e-3));
  // Overflow-safe: e^{-r^2/2} / erfc(r / sqrt 2) ~ r sqrt(pi/2) for large r.
  const auto big = gd_stepsize_schedule(60.0, 1.0);
  CHECK(std::isfinite(big(0)));
  CHECK(rel(big(0), 4.0 * 60.0 * std::sqrt(kPi / 2.0)) < 1e-3);
  CHECK(gd_constant_schedule(1.0, 0.25)(3) == 0.25);
  CHECK(gd_constant_schedule(1.0, 0.25)(0) == s1(0));
}
