#include "polyct/analytics.hpp"

#include <cmath>
#include <numbers>

#include "polyct/error.hpp"

namespace polyct::analytics {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kSqrt2 = std::numbers::sqrt2;
// Above this argument the continued fraction is used for erfcx.
constexpr double kCfThreshold = 10.0;
constexpr int kCfTerms = 60;

// exp(t^2) with the rounding error of t*t folded back in.
double exp_square(double t) {
  const double hi = t * t;
  const double lo = std::fma(t, t, -hi);
  return std::exp(hi) * (1.0 + lo);
}

// Tail R(t) of erfc's continued fraction,
//   erfcx(t) = 1 / (sqrt(pi) (t + R)),  R = (1/2)/(t + (2/2)/(t + (3/2)/(t + ...))).
// Evaluated backwards; accurate to machine precision for t >= kCfThreshold.
double cf_tail(double t) {
  double r = 0.0;
  for (int n = kCfTerms; n >= 1; --n) r = (0.5 * n) / (t + r);
  return r;
}

// 1 - sqrt(pi) t erfcx(t), for t >= 0, without cancellation for large t.
double one_minus_scaled_tail(double t) {
  if (t >= kCfThreshold) {
    const double r = cf_tail(t);
    return r / (t + r);
  }
  return 1.0 - kSqrtPi * t * erfcx(t);
}

}  // namespace

double erfc(double t) { return std::erfc(t); }

double erfcx(double t) {
  if (std::isnan(t)) return t;
  if (t < 0.0) {
    // Reflection erfc(-t) = 2 - erfc(t).
    return 2.0 * exp_square(t) - erfcx(-t);
  }
  if (t >= kCfThreshold) return 1.0 / (kSqrtPi * (t + cf_tail(t)));
  return exp_square(t) * std::erfc(t);
}

double exp_pos_moment(double c) { return 0.5 * erfcx(c / kSqrt2); }

double exp_plus_moment(double c) {
  constexpr double kSqrt2OverPi = 0.79788456080286535588;
  return 0.5 * kSqrt2OverPi * one_minus_scaled_tail(c / kSqrt2);
}

double expected_loss_at_zero(double r) { return 0.5 * (1.0 - erfcx(r / kSqrt2)); }

double mu_bound(double signal_norm) {
  const double r2 = signal_norm * signal_norm;
  return 1.0 / (4.0 * kSqrtPi * (1.0 + 9.0 * std::numbers::pi * r2));
}

double lipschitz_bound(std::int64_t dim, std::int64_t samples) {
  return 1.0 + 2.0 * std::sqrt(static_cast<double>(dim) / static_cast<double>(samples));
}

double kappa_bound(double signal_norm) {
  const double r2 = signal_norm * signal_norm;
  return 8.0 * kSqrtPi * (1.0 + 9.0 * std::numbers::pi * r2);
}

TheoryConstants theory_constants(double signal_norm, std::int64_t dim,
                                 std::int64_t samples, std::optional<double> eta) {
  if (!(signal_norm >= 1.0) || !std::isfinite(signal_norm)) {
    throw Error(ErrorCode::invalid_argument, "theory constants need a signal norm >= 1");
  }
  if (dim < 1 || samples < dim) {
    throw Error(ErrorCode::invalid_argument, "theory constants need m >= d >= 1");
  }
  TheoryConstants c;
  c.signal_norm = signal_norm;
  c.dim = dim;
  c.samples = samples;
  c.mu = mu_bound(signal_norm);
  c.lip = lipschitz_bound(dim, samples);
  c.kappa = kappa_bound(signal_norm);
  const double ratio = c.mu / c.lip;
  c.eta = eta.value_or(ratio);
  if (!(c.eta > 0.0)) throw Error(ErrorCode::invalid_argument, "eta must be positive");
  c.rho = c.eta * ratio * ratio;
  c.rho_bar = c.rho / (40.0 * kSqrtPi * signal_norm);
  c.t0 = static_cast<std::int64_t>(std::ceil(std::log(2.0) / c.rho_bar));
  return c;
}

GdSchedule gd_constant_schedule(double signal_norm, double eta) {
  // exp(-r^2/2) / erfc(r/sqrt 2) == 1 / erfcx(r/sqrt 2).
  return GdSchedule{4.0 / erfcx(signal_norm / kSqrt2), eta};
}

GdSchedule gd_stepsize_schedule(double signal_norm, double c0) {
  return gd_constant_schedule(signal_norm, c0 * std::exp(-5.0 * signal_norm));
}

}  // namespace polyct::analytics
