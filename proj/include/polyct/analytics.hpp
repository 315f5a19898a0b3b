#pragma once

#include <cstdint>
#include <optional>

namespace polyct::analytics {

/// Complementary error function (2/sqrt(pi)) * int_t^inf exp(-u^2) du.
double erfc(double t);

/// Scaled complementary error function exp(t^2) * erfc(t). Finite for all
/// t >= 0; uses a continued fraction once exp(t^2) would lose accuracy.
double erfcx(double t);

/// E[exp(-cX) 1{X >= 0}] for X ~ N(0,1), i.e. 1/2 exp(c^2/2) erfc(c/sqrt 2).
double exp_pos_moment(double c);

/// E[exp(-cX) X_+] for X ~ N(0,1) = 1/2 (sqrt(2/pi) - c exp(c^2/2) erfc(c/sqrt 2)).
/// Evaluated without cancellation for large c.
double exp_plus_moment(double c);

/// Expected l1 loss at the origin for a signal of norm r under Gaussian
/// sensing: 1/2 (1 - exp(r^2/2) erfc(r/sqrt 2)). Increasing, tends to 1/2.
double expected_loss_at_zero(double r);

/// Regularity and rate constants of the l1 recovery program for a signal of
/// norm `signal_norm` sensed by `samples` Gaussian vectors in dimension `dim`.
struct TheoryConstants {
  double signal_norm = 0.0;
  std::int64_t dim = 0;
  std::int64_t samples = 0;
  double mu = 0.0;       // sharpness / aiming modulus
  double lip = 0.0;      // Lipschitz modulus
  double kappa = 0.0;    // condition-number bound, kappa >= lip / mu
  double eta = 0.0;      // Polyak scaling used for rho
  double rho = 0.0;      // contraction once close to the solution
  double rho_bar = 0.0;  // contraction during the initial phase
  std::int64_t t0 = 0;   // iterations bound for the initial phase
};

/// Sharpness modulus 1 / (4 sqrt(pi) (1 + 9 pi r^2)).
double mu_bound(double signal_norm);
/// Lipschitz modulus 1 + 2 sqrt(d / m).
double lipschitz_bound(std::int64_t dim, std::int64_t samples);
/// Condition-number bound 8 sqrt(pi) (1 + 9 pi r^2).
double kappa_bound(double signal_norm);

/// Requires r >= 1 and m >= d >= 1. `eta` defaults to mu / lip.
TheoryConstants theory_constants(double signal_norm, std::int64_t dim,
                                 std::int64_t samples,
                                 std::optional<double> eta = std::nullopt);

/// Stepsizes of the gradient-descent baseline on the squared loss:
/// eta_0 = 4 exp(-r^2/2) / erfc(r/sqrt 2) and eta_k = `later` for k >= 1.
struct GdSchedule {
  double initial = 0.0;
  double later = 0.0;

  double operator()(std::int64_t k) const { return k == 0 ? initial : later; }
};

/// eta_k = c0 exp(-5 r) for k >= 1.
GdSchedule gd_stepsize_schedule(double signal_norm, double c0);

/// Same first step, constant `eta` afterwards (used by the stepsize grids).
GdSchedule gd_constant_schedule(double signal_norm, double eta);

}  // namespace polyct::analytics
