#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "polyct/analytics.hpp"
#include "polyct/error.hpp"
#include "polyct/rng.hpp"
#include "polyct/solvers.hpp"

using namespace polyct;
using namespace polyct::sensing;
using namespace polyct::solvers;

namespace {

struct Problem {
  SensingEnsemble ens;
  MeasurementSet ms;
  Vector truth;
  Problem(std::int64_t d, std::int64_t m, double r, std::uint64_t seed,
          NoiseModel noise = NoiseModel::clean())
      : ens(gaussian_ensemble(d, m, derive_seed(seed, 1))),
        truth(sample_signal(d, r, derive_seed(seed, 2))) {
    ms = generate_measurements(ens, truth, noise, derive_seed(seed, 3));
  }
  loss::Objective l1() const { return {ens, ms, loss::LossKind::l1}; }
  loss::Objective sq() const { return {ens, ms, loss::LossKind::squared}; }
};

}  // namespace

TEST_CASE("polyak at the optimum takes no step") {
  Problem p(8, 32, 1.0, 1);
  SolveOptions o;
  const auto res = polyak_sgm(p.l1(), p.truth, o);
  CHECK(res.trace.iterations == 0);
  CHECK(res.trace.status == SolveStatus::converged_exact);
  CHECK(res.x == p.truth);
}

TEST_CASE("polyak recovers at m = 8d") {
  int ok = 0;
  for (std::uint64_t s = 0; s < 25; ++s) {
    Problem p(64, 512, 2.0, 100 + s);
    SolveOptions o;
    o.max_iters = 10000;
    o.distance_tolerance = 1e-5;
    o.trace_every = 1000;
    const auto res = polyak_sgm(p.l1(), Vector::Zero(64), o);
    ok += (res.x - p.truth).norm() <= 1e-5;
  }
  CHECK(ok >= 24);
}

TEST_CASE("polyak trace bookkeeping and projection hook") {
  Problem p(16, 128, 1.0, 2);
  SolveOptions o;
  o.max_iters = 50;
  o.trace_every = 10;
  const double radius = 0.5;
  o.projection = [radius](Vector& x) {
    const double n = x.norm();
    if (n > radius) x *= radius / n;
  };
  const auto res = polyak_sgm(p.l1(), Vector::Zero(16), o);
  CHECK(res.trace.iterations == 50);
  CHECK(res.trace.evals == 50);
  CHECK(res.trace.status == SolveStatus::budget_exhausted);
  CHECK(res.x.norm() <= radius + 1e-12);
  REQUIRE(res.trace.records.size() == 6);
  for (std::size_t i = 0; i < 5; ++i) CHECK(res.trace.records[i].k == static_cast<std::int64_t>(10 * i));
  CHECK(res.trace.records.back().k == 50);
  CHECK(std::isnan(res.trace.records.back().grad_norm));
  CHECK(res.trace.final_value == doctest::Approx(p.l1().value(res.x)));

  o.eta = 1.5;
  CHECK_THROWS_AS(polyak_sgm(p.l1(), Vector::Zero(16), o), Error);
}

TEST_CASE("polyak reports a zero subgradient away from the optimum") {
  // Every row has <a_i, x> < 0 at x, so the l1 subgradient vanishes while f > 0.
  Matrix a(2, 1);
  a << 1.0, 2.0;
  const auto ens = SensingEnsemble::from_dense_rows(a);
  const auto ms = generate_measurements(ens, Vector::Ones(1), NoiseModel::clean(), 0);
  loss::Objective f(ens, ms, loss::LossKind::l1);
  const auto res = polyak_sgm(f, Vector::Constant(1, -1.0), SolveOptions{});
  CHECK(res.trace.status == SolveStatus::zero_subgradient_at_nonoptimal);
}

TEST_CASE("adaptive round budget") {
  const double k = 2.0, eps = 1e-3;
  const auto expect = static_cast<std::int64_t>(std::ceil(7.0 * std::pow(k, 3.5)) +
                                                std::ceil(2.0 * k * k * k * std::log(k / eps)));
  CHECK(adaptive_round_budget(k, eps) == expect);
  CHECK(adaptive_round_budget(1.0, eps) == 7 + static_cast<std::int64_t>(std::ceil(2.0 * std::log(1e3))));
  CHECK_THROWS_AS(adaptive_round_budget(1e8, eps), Error);
}

TEST_CASE("adaptive polyak") {
  Problem p(32, 256, 1.0, 3);
  const auto res = ad_polyak_sgm(p.l1(), Vector::Zero(32), 1e-3);
  const double kappa = analytics::kappa_bound(1.0);
  CHECK(res.rounds.size() <= static_cast<std::size_t>(std::ceil(std::log2(kappa))) + 1);
  CHECK(res.total_evals <= 8.0 * std::pow(kappa, 3.5) + 3.0 * std::pow(kappa, 3) * std::log(kappa / 1e-3));
  CHECK(p.l1().value(res.x) <= 1e-3 * p.l1().value(Vector::Zero(32)));
  std::int64_t sum = 0;
  for (const auto& r : res.rounds) sum += r.evals;
  CHECK(sum == res.total_evals);

  try {
    ad_polyak_sgm(p.l1(), p.truth, 1e-3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
  }
}

TEST_CASE("noopt first round is polyak at half scaling") {
  Problem p(16, 128, 1.0, 4);
  const auto f = p.l1();
  const Vector x0 = Vector::Zero(16);
  const auto res = polyak_sgm_noopt(f, x0, 0.0, 1.0, 40, 5);
  SolveOptions o;
  o.eta = 0.5;
  o.max_iters = 40;
  const auto first = polyak_sgm(f, x0, o);
  CHECK(res.rounds.size() == 5);
  CHECK(res.rounds[0].f_estimate == 0.0);
  CHECK(res.rounds[0].final_value == first.trace.final_value);
  CHECK(res.rounds[1].f_estimate == doctest::Approx(0.5 * first.trace.final_value));
  for (std::size_t t = 1; t < res.rounds.size(); ++t) {
    CHECK(res.rounds[t].f_estimate ==
          doctest::Approx(0.5 * (res.rounds[t - 1].final_value + res.rounds[t - 1].f_estimate)));
  }
  double best = INFINITY;
  for (const auto& r : res.rounds) best = std::min(best, r.final_value);
  CHECK(f.value(res.x) == best);
  CHECK(res.rounds[static_cast<std::size_t>(res.best_round)].final_value == best);
}

TEST_CASE("noopt recovers clean signals") {
  Problem p(32, 256, 2.0, 5);
  const auto res = polyak_sgm_noopt(p.l1(), Vector::Zero(32), 0.0, 1.0, 3000, 2);
  CHECK((res.x - p.truth).norm() <= 1e-5);
}

TEST_CASE("gradient descent basics") {
  Problem p(16, 128, 1.0, 6);
  GdOptions o;
  o.max_iters = 20;
  const auto at_truth = gradient_descent(p.sq(), p.truth, analytics::gd_stepsize_schedule(1.0, 1.0), o);
  CHECK(at_truth.trace.status == SolveStatus::converged_exact);
  CHECK(at_truth.trace.iterations == 0);

  o.max_iters = 1;
  const auto one = gradient_descent(p.sq(), Vector::Zero(16), analytics::gd_stepsize_schedule(1.0, 1.0), o);
  CHECK(one.x.norm() > 0.0);
  const Vector expect = -analytics::gd_stepsize_schedule(1.0, 1.0)(0) * p.sq().direction(Vector::Zero(16));
  CHECK((one.x - expect).norm() <= 1e-14);

  o.max_iters = 500;
  // The loss saturates, so no stepsize overflows; a projection producing NaN does.
  o.projection = [](Vector& x) {
    if (x.norm() > 0.0) x[0] = std::numeric_limits<double>::quiet_NaN();
  };
  try {
    gradient_descent(p.sq(), Vector::Zero(16), analytics::gd_constant_schedule(1.0, 1.0), o);
    FAIL("expected a numerical failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numerical_failure);
    CHECK(e.iteration().has_value());
  }
}

TEST_CASE("noisy runs reach similar floors at equal budgets") {
  // Equal budgets of 10^4 evaluations at m = 8d under S = 1e5.
  int similar = 0;
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    Problem p(32, 256, 2.0, 700 + s, NoiseModel::poisson_gaussian(1e5));
    const auto no = polyak_sgm_noopt(p.l1(), Vector::Zero(32), 0.0, 1.0, 1000, 10);
    double best = INFINITY;
    for (int j = -3; j <= 3; ++j) {
      GdOptions o;
      o.max_iters = 10000;
      o.trace_every = 10000;
      try {
        const auto g = gradient_descent(p.sq(), Vector::Zero(32),
                                        analytics::gd_constant_schedule(2.0, std::ldexp(1.0, j)), o);
        best = std::min(best, (g.x - p.truth).norm());
      } catch (const Error&) {
      }
    }
    const double ratio = (no.x - p.truth).norm() / best;
    similar += ratio > 0.5 && ratio < 2.0;
  }
  CHECK(similar == seeds);
}
