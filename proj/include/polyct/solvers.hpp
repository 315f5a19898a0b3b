#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "polyct/analytics.hpp"
#include "polyct/loss.hpp"
#include "polyct/types.hpp"

namespace polyct::solvers {

enum class SolveStatus {
  budget_exhausted,
  tolerance_met,
  zero_subgradient_at_nonoptimal,
  // The iterate attained the target value f_star (or went below it).
  converged_exact,
};

const char* to_string(SolveStatus status) noexcept;

/// In-place Euclidean projection onto a constraint set, applied after each step.
using Projection = std::function<void(Vector&)>;

struct SolveOptions {
  double eta = 1.0;               // Polyak scaling in (0, 1]
  std::int64_t max_iters = 1000;  // step budget K
  double f_star = 0.0;            // optimal value (or an estimate of it)
  // Early stopping, off unless set. The distance test needs a known truth.
  std::optional<double> distance_tolerance;
  std::optional<double> value_tolerance;  // stop once f - f_star <= tol
  Projection projection;
  std::int64_t trace_every = 1;

  void validate() const;
};

struct TraceRecord {
  std::int64_t k = 0;       // iteration index within the run (or round)
  double f = 0.0;           // objective value used to form the step
  double grad_norm = 0.0;   // ||v_k||; NaN on the closing record
  double step = 0.0;        // length of the unprojected step
  double dist = 0.0;        // ||x_k - x_star||; NaN without a known truth
  std::int64_t evals = 0;   // cumulative (sub)gradient evaluations before x_k's
  std::int32_t round = 0;   // restart index for multi-round methods
};

struct SolveTrace {
  std::vector<TraceRecord> records;
  SolveStatus status = SolveStatus::budget_exhausted;
  std::int64_t iterations = 0;  // steps taken
  std::int64_t evals = 0;       // (sub)gradient evaluations
  double final_value = 0.0;     // objective at the returned point
  double wall_seconds = 0.0;
};

struct SolveResult {
  Vector x;
  SolveTrace trace;
};

/// Subgradient method with scaled Polyak stepsize:
///   x_{k+1} = P(x_k - eta (f(x_k) - f_star) / ||v_k||^2 v_k),  v_k in df(x_k).
/// Stops early when f(x_k) <= f_star (converged_exact) or v_k = 0 while
/// f(x_k) > f_star (zero_subgradient_at_nonoptimal).
SolveResult polyak_sgm(const loss::Objective& objective, const Vector& x0,
                       const SolveOptions& options);

struct AdaptiveOptions {
  double kappa_cap = 1.0e6;  // rounds stop with budget_overflow beyond this
  bool warm_start = false;   // restart every round from x0 unless set
  std::int64_t trace_every = 1;
};

struct AdaptiveRound {
  double kappa_hat = 0.0;
  std::int64_t budget = 0;
  std::int64_t evals = 0;
  double final_value = 0.0;
  SolveStatus status = SolveStatus::budget_exhausted;
};

struct AdaptiveResult {
  Vector x;
  std::int64_t total_evals = 0;
  std::vector<AdaptiveRound> rounds;
  SolveTrace trace;
};

/// Round budget ceil(7 k^{7/2}) + ceil(2 k^3 log(k / eps)) for estimate k.
std::int64_t adaptive_round_budget(double kappa_hat, double eps);

/// Polyak method with doubling condition-number estimates kappa_hat = 1, 2, 4, ...
/// (eta = 1 / kappa_hat, f_star = 0) until f(x_i) <= eps f(x0).
AdaptiveResult ad_polyak_sgm(const loss::Objective& objective, const Vector& x0, double eps,
                             const AdaptiveOptions& options = {});

struct NoOptOptions {
  bool warm_start = false;
  std::int64_t trace_every = 1;
  Projection projection;
};

struct NoOptRound {
  double f_estimate = 0.0;  // optimal-value estimate used in this round
  double final_value = 0.0;
  std::int64_t evals = 0;
  SolveStatus status = SolveStatus::budget_exhausted;
};

struct NoOptResult {
  Vector x;
  std::vector<NoOptRound> rounds;
  std::int64_t best_round = 0;
  SolveTrace trace;
};

/// Polyak method for an unknown optimal value: round t runs polyak_sgm with
/// scaling eta/2 against the estimate f_{t-1} (starting at the lower bound
/// f_lb), then sets f_t = (f(x_t) + f_{t-1}) / 2. Returns the round output with
/// the smallest objective value.
NoOptResult polyak_sgm_noopt(const loss::Objective& objective, const Vector& x0, double f_lb,
                             double eta, std::int64_t t_inner, std::int64_t t_outer,
                             const NoOptOptions& options = {});

struct GdOptions {
  std::int64_t max_iters = 1000;
  Projection projection;
  std::optional<double> distance_tolerance;
  std::int64_t trace_every = 1;
};

/// Gradient descent x_{k+1} = P(x_k - eta_k grad L(x_k)) on the squared loss.
SolveResult gradient_descent(const loss::Objective& objective, const Vector& x0,
                             const analytics::GdSchedule& schedule, const GdOptions& options);

}  // namespace polyct::solvers
