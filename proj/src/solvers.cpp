#include "polyct/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "polyct/error.hpp"

namespace polyct::solvers {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double distance_to_truth(const loss::Objective& objective, const Vector& x) {
  const auto& truth = objective.measurements().truth;
  return truth ? (x - *truth).norm() : kNaN;
}

void require_finite(double value, const Vector& x, std::int64_t k, const char* method) {
  if (!std::isfinite(value) || !x.allFinite()) {
    throw Error(ErrorCode::numerical_failure,
                std::string(method) + " produced a non-finite value at iteration " +
                    std::to_string(k),
                k);
  }
}

void check_start(const loss::Objective& objective, const Vector& x0) {
  if (x0.size() != objective.dim()) {
    throw Error(ErrorCode::dimension_mismatch, "initial point has length " +
                                                   std::to_string(x0.size()) + ", expected " +
                                                   std::to_string(objective.dim()));
  }
}

// Appends `part` to `total`, offsetting cumulative evaluation counts.
void append_trace(SolveTrace& total, const SolveTrace& part, std::int32_t round) {
  for (TraceRecord r : part.records) {
    r.evals += total.evals;
    r.round = round;
    total.records.push_back(r);
  }
  total.evals += part.evals;
  total.iterations += part.iterations;
}

}  // namespace

const char* to_string(SolveStatus status) noexcept {
  switch (status) {
    case SolveStatus::budget_exhausted: return "budget-exhausted";
    case SolveStatus::tolerance_met: return "tolerance-met";
    case SolveStatus::zero_subgradient_at_nonoptimal: return "zero-subgradient-at-nonoptimal";
    case SolveStatus::converged_exact: return "converged-exact";
  }
  return "unknown";
}

void SolveOptions::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::invalid_argument, "eta must lie in (0, 1]");
  if (max_iters < 1) throw Error(ErrorCode::invalid_argument, "max_iters must be >= 1");
  if (trace_every < 1) throw Error(ErrorCode::invalid_argument, "trace_every must be >= 1");
  if (!std::isfinite(f_star)) throw Error(ErrorCode::invalid_argument, "f_star must be finite");
}

SolveResult polyak_sgm(const loss::Objective& objective, const Vector& x0,
                       const SolveOptions& options) {
  options.validate();
  check_start(objective, x0);
  const auto start = Clock::now();
  const bool has_truth = objective.measurements().truth.has_value();
  if (options.distance_tolerance && !has_truth) {
    throw Error(ErrorCode::invalid_argument, "distance tolerance needs a known truth");
  }

  SolveResult out{x0, {}};
  Vector& x = out.x;
  SolveTrace& trace = out.trace;
  std::int64_t k = 0;
  bool stopped = false;
  for (; k < options.max_iters; ++k) {
    const double dist = distance_to_truth(objective, x);
    if (options.distance_tolerance && dist <= *options.distance_tolerance) {
      trace.status = SolveStatus::tolerance_met;
      stopped = true;
      break;
    }
    const loss::Evaluation eval = objective.evaluate(x);
    ++trace.evals;
    const double gap = eval.value - options.f_star;
    const double grad_norm = eval.direction.norm();
    require_finite(eval.value, eval.direction, k, "polyak_sgm");
    const bool record = k % options.trace_every == 0;
    if (gap <= 0.0) {
      trace.records.push_back({k, eval.value, grad_norm, 0.0, dist, trace.evals - 1, 0});
      trace.status = SolveStatus::converged_exact;
      stopped = true;
      break;
    }
    if (options.value_tolerance && gap <= *options.value_tolerance) {
      trace.records.push_back({k, eval.value, grad_norm, 0.0, dist, trace.evals - 1, 0});
      trace.status = SolveStatus::tolerance_met;
      stopped = true;
      break;
    }
    if (grad_norm == 0.0) {
      trace.records.push_back({k, eval.value, grad_norm, 0.0, dist, trace.evals - 1, 0});
      trace.status = SolveStatus::zero_subgradient_at_nonoptimal;
      stopped = true;
      break;
    }
    const double scale = options.eta * gap / (grad_norm * grad_norm);
    if (record) {
      trace.records.push_back({k, eval.value, grad_norm, scale * grad_norm, dist, trace.evals - 1, 0});
    }
    x.noalias() -= scale * eval.direction;
    if (options.projection) options.projection(x);
    require_finite(0.0, x, k + 1, "polyak_sgm");
  }
  trace.iterations = k;
  if (!stopped) trace.status = SolveStatus::budget_exhausted;
  trace.final_value = objective.value(x);
  const bool closed = !trace.records.empty() && trace.records.back().k == k;
  if (!closed) {
    trace.records.push_back(
        {k, trace.final_value, kNaN, 0.0, distance_to_truth(objective, x), trace.evals, 0});
  }
  trace.wall_seconds = seconds_since(start);
  return out;
}

std::int64_t adaptive_round_budget(double kappa_hat, double eps) {
  const double first = std::ceil(7.0 * std::pow(kappa_hat, 3.5));
  const double second = std::ceil(2.0 * std::pow(kappa_hat, 3.0) * std::log(kappa_hat / eps));
  const double total = first + second;
  if (!(total < 9.0e18)) {
    throw Error(ErrorCode::budget_overflow, "round budget overflows for kappa_hat = " +
                                                std::to_string(kappa_hat));
  }
  return static_cast<std::int64_t>(total);
}

AdaptiveResult ad_polyak_sgm(const loss::Objective& objective, const Vector& x0, double eps,
                             const AdaptiveOptions& options) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error(ErrorCode::invalid_argument, "eps must lie in (0, 1)");
  check_start(objective, x0);
  const auto start = Clock::now();
  const double f0 = objective.value(x0);
  if (!(f0 > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "adaptive Polyak method needs f(x0) > 0");
  }
  AdaptiveResult out;
  Vector start_point = x0;
  for (double kappa_hat = 1.0;; kappa_hat *= 2.0) {
    if (kappa_hat > options.kappa_cap) {
      throw Error(ErrorCode::budget_overflow,
                  "condition-number estimate exceeded the cap " + std::to_string(options.kappa_cap));
    }
    SolveOptions inner;
    inner.eta = 1.0 / kappa_hat;
    inner.max_iters = adaptive_round_budget(kappa_hat, eps);
    inner.f_star = 0.0;
    inner.trace_every = options.trace_every;
    SolveResult round = polyak_sgm(objective, start_point, inner);
    append_trace(out.trace, round.trace, static_cast<std::int32_t>(out.rounds.size()));
    out.rounds.push_back({kappa_hat, inner.max_iters, round.trace.evals, round.trace.final_value,
                          round.trace.status});
    out.total_evals += round.trace.evals;
    const bool done = round.trace.final_value <= eps * f0;
    out.x = std::move(round.x);
    if (done) {
      out.trace.status = round.trace.status;
      out.trace.final_value = out.rounds.back().final_value;
      break;
    }
    if (options.warm_start) start_point = out.x;
  }
  out.trace.wall_seconds = seconds_since(start);
  return out;
}

NoOptResult polyak_sgm_noopt(const loss::Objective& objective, const Vector& x0, double f_lb,
                             double eta, std::int64_t t_inner, std::int64_t t_outer,
                             const NoOptOptions& options) {
  if (t_inner < 1 || t_outer < 1) {
    throw Error(ErrorCode::invalid_argument, "inner and outer budgets must be >= 1");
  }
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::invalid_argument, "eta must lie in (0, 1]");
  if (!std::isfinite(f_lb)) throw Error(ErrorCode::invalid_argument, "lower bound must be finite");
  check_start(objective, x0);
  const auto start = Clock::now();
  NoOptResult out;
  double estimate = f_lb;
  double best_value = std::numeric_limits<double>::infinity();
  Vector start_point = x0;
  for (std::int64_t t = 0; t < t_outer; ++t) {
    SolveOptions inner;
    inner.eta = eta / 2.0;
    inner.max_iters = t_inner;
    inner.f_star = estimate;
    inner.trace_every = options.trace_every;
    inner.projection = options.projection;
    SolveResult round = polyak_sgm(objective, start_point, inner);
    append_trace(out.trace, round.trace, static_cast<std::int32_t>(t));
    const double value = round.trace.final_value;
    out.rounds.push_back({estimate, value, round.trace.evals, round.trace.status});
    if (value < best_value) {
      best_value = value;
      out.best_round = t;
      out.x = round.x;
    }
    estimate = 0.5 * (value + estimate);
    if (options.warm_start) start_point = std::move(round.x);
  }
  out.trace.status = out.rounds[static_cast<std::size_t>(out.best_round)].status;
  out.trace.final_value = best_value;
  out.trace.wall_seconds = seconds_since(start);
  return out;
}

SolveResult gradient_descent(const loss::Objective& objective, const Vector& x0,
                             const analytics::GdSchedule& schedule, const GdOptions& options) {
  if (options.max_iters < 1) throw Error(ErrorCode::invalid_argument, "max_iters must be >= 1");
  if (options.trace_every < 1) throw Error(ErrorCode::invalid_argument, "trace_every must be >= 1");
  if (!(schedule.initial > 0.0) || !(schedule.later > 0.0) || !std::isfinite(schedule.initial) ||
      !std::isfinite(schedule.later)) {
    throw Error(ErrorCode::invalid_argument, "stepsizes must be finite and positive");
  }
  check_start(objective, x0);
  const auto start = Clock::now();
  const bool has_truth = objective.measurements().truth.has_value();
  if (options.distance_tolerance && !has_truth) {
    throw Error(ErrorCode::invalid_argument, "distance tolerance needs a known truth");
  }
  SolveResult out{x0, {}};
  Vector& x = out.x;
  SolveTrace& trace = out.trace;
  std::int64_t k = 0;
  bool stopped = false;
  for (; k < options.max_iters; ++k) {
    const double dist = distance_to_truth(objective, x);
    if (options.distance_tolerance && dist <= *options.distance_tolerance) {
      trace.status = SolveStatus::tolerance_met;
      stopped = true;
      break;
    }
    const loss::Evaluation eval = objective.evaluate(x);
    ++trace.evals;
    require_finite(eval.value, eval.direction, k, "gradient_descent");
    const double grad_norm = eval.direction.norm();
    if (grad_norm == 0.0) {
      trace.records.push_back({k, eval.value, grad_norm, 0.0, dist, trace.evals - 1, 0});
      trace.status = SolveStatus::converged_exact;
      stopped = true;
      break;
    }
    const double eta = schedule(k);
    if (k % options.trace_every == 0) {
      trace.records.push_back({k, eval.value, grad_norm, eta * grad_norm, dist, trace.evals - 1, 0});
    }
    x.noalias() -= eta * eval.direction;
    if (options.projection) options.projection(x);
    require_finite(0.0, x, k + 1, "gradient_descent");
  }
  trace.iterations = k;
  if (!stopped) trace.status = SolveStatus::budget_exhausted;
  trace.final_value = objective.value(x);
  const bool closed = !trace.records.empty() && trace.records.back().k == k;
  if (!closed) {
    trace.records.push_back(
        {k, trace.final_value, kNaN, 0.0, distance_to_truth(objective, x), trace.evals, 0});
  }
  trace.wall_seconds = seconds_since(start);
  return out;
}

}  // namespace polyct::solvers
