#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "polyct/solvers.hpp"
#include "polyct/tv.hpp"

namespace polyct::experiments {

enum class ExperimentKind { phase_transition, convergence, robustness, noisy, ct };

const char* to_string(ExperimentKind kind) noexcept;
ExperimentKind parse_kind(const std::string& name);

/// Every randomized quantity derives from `seed` through derive_seed, so a
/// config reproduces its outputs exactly. Serialized as JSON; unknown keys are
/// rejected.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::phase_transition;
  std::string ensemble = "gaussian";  // gaussian | rwht
  std::int64_t dim = 32;
  std::vector<double> ratios{2, 4, 8, 16};  // m / d
  std::vector<double> signal_norms{1, 2, 4, 8};
  std::int64_t trials = 25;
  std::uint64_t seed = 1;
  std::int64_t max_iters = 10000;
  double tolerance = 1e-5;  // success radius ||x - x_star||
  double eta = 1.0;         // Polyak scaling
  std::vector<int> gd_exponents{-3, -2, -1, 0, 1, 2, 3};  // GD grid 2^j
  std::vector<double> eta_grid{1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 0.25, 0.5, 1.0};
  std::string stepsizes = "optimized";  // optimized | theory (convergence)
  double gd_c0 = 1.0;                   // c0 of the theory GD schedule
  double adaptive_eps = 1e-3;
  bool noise = true;
  double detector_scale = 1e5;
  std::int64_t t_inner = 1000;
  std::int64_t t_outer = 10;
  // Imaging experiment.
  std::int64_t image_side = 64;
  std::int64_t n_angles = 30;
  std::int64_t n_detectors = 0;  // 0 means image_side
  double center_radius_factor = 2.0;
  double center_intensity = 0.5;
  double global_scale = 4.0;
  std::string phantom_table = "original";  // original | modified
  std::optional<double> tv_radius;         // default tv_norm of the phantom
  std::vector<std::int64_t> checkpoints{1000, 5000, 10000};
  double dr_tol = 1e-5;
  std::int64_t dr_max_sweeps = 2000;
  bool dr_warm_start = false;
  std::int64_t trace_every = 1;
  std::int64_t threads = 1;
  std::string out_dir;  // empty: nothing written

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
  /// FNV-1a of the canonical JSON, excluding out_dir and threads.
  std::uint64_t hash() const;
  std::string hash_hex() const;
  void validate() const;

  /// Desk-scale defaults for each experiment; `full_scale` selects the
  /// full sizes.
  static ExperimentConfig defaults(ExperimentKind kind, bool full_scale = false);
};

/// Runs body(i) for i < count on up to `threads` workers. Results must be
/// written to slot i so the outcome is independent of scheduling.
void parallel_for(std::int64_t count, std::int64_t threads,
                  const std::function<void(std::int64_t)>& body);

struct Instance {
  Vector truth;
  sensing::SensingEnsemble ensemble;
  sensing::MeasurementSet measurements;
};

/// Gaussian or RWHT instance with a signal of norm r; noise per cfg.noise only
/// when `noisy` is set.
Instance make_instance(const ExperimentConfig& cfg, std::int64_t samples, double signal_norm,
                       std::uint64_t seed, bool noisy);

struct GridChoice {
  int exponent = 0;
  solvers::SolveResult result;
};

/// Gradient descent on the squared loss for each eta = 2^j in the grid (first
/// step from the baseline formula); returns the run with the smallest final
/// distance (final loss without truth). Diverging runs count as infinitely bad.
GridChoice gd_grid_search(const loss::Objective& squared, const Vector& x0, double signal_norm,
                          const std::vector<int>& exponents, const solvers::GdOptions& options);

// ---------------------------------------------------------------------------

struct PhaseCell {
  double signal_norm = 0.0;
  double ratio = 0.0;
  std::int64_t trials = 0;
  std::int64_t polyak_successes = 0;
  std::int64_t gd_successes = 0;
  double polyak_probability() const { return static_cast<double>(polyak_successes) / trials; }
  double gd_probability() const { return static_cast<double>(gd_successes) / trials; }
};

struct PhaseTransitionResult {
  std::vector<PhaseCell> cells;  // signal-norm major, ratio minor
  const PhaseCell& cell(double signal_norm, double ratio) const;
};

PhaseTransitionResult run_phase_transition(const ExperimentConfig& cfg);

struct MethodTrace {
  std::string method;
  double signal_norm = 0.0;
  double ratio = 0.0;
  std::int64_t trial = 0;
  double parameter = 0.0;  // eta, or the chosen GD step
  solvers::SolveTrace trace;
  double final_distance = 0.0;
};

struct ConvergenceResult {
  std::vector<MethodTrace> runs;
};

/// PolyakSGM, AdPolyakSGM and GD per (signal norm, ratio, trial). In theory
/// mode m = d r^4, Polyak uses eta = 1 / kappa and GD the baseline schedule
/// with c0 = cfg.gd_c0; otherwise Polyak uses cfg.eta and GD the best of its grid.
ConvergenceResult run_convergence(const ExperimentConfig& cfg);

struct RobustnessRow {
  std::string method;
  double stepsize = 0.0;
  std::vector<std::int64_t> iterations;  // per instance, capped at max_iters
  std::vector<bool> capped;
  double median = 0.0;
  double stddev = 0.0;
};

struct RobustnessResult {
  std::vector<RobustnessRow> rows;
};

/// Iterations to reach ||x - x_star|| <= tolerance for PolyakSGM over
/// cfg.eta_grid and GD over 2^gd_exponents, on cfg.trials instances.
RobustnessResult run_robustness(const ExperimentConfig& cfg);

struct NoisyRun {
  double signal_norm = 0.0;
  std::int64_t trial = 0;
  double detector_scale = 0.0;
  solvers::SolveTrace noopt;
  solvers::SolveTrace gd;
  int gd_exponent = 0;
  double noopt_final_distance = 0.0;
  double gd_final_distance = 0.0;
  std::int64_t noopt_evals_to_2x = 0;  // first evaluation count within 2x of final distance
  std::int64_t gd_evals_to_2x = 0;
};

struct NoisyResult {
  std::vector<NoisyRun> runs;
};

/// PolyakSGM-NoOpt (lower bound 0, eta = cfg.eta) against the GD grid with an
/// equal evaluation budget t_outer * t_inner, m = ratio * d.
NoisyResult run_noisy(const ExperimentConfig& cfg);

/// First cumulative evaluation count at which the trace distance is within
/// `factor` of `target`; the total evaluation count if never.
std::int64_t evals_to_within(const solvers::SolveTrace& trace, double target, double factor);

struct CtSnapshot {
  std::string method;
  std::int64_t iteration = 0;
  double psnr = 0.0;
  double tv = 0.0;
  double distance = 0.0;
  tv::ImageVec image;
};

struct CtResult {
  tv::ImageVec truth;
  double lambda = 0.0;
  std::int64_t samples = 0;
  int gd_exponent = 0;
  std::vector<CtSnapshot> snapshots;
  std::int64_t projections = 0;
  std::int64_t dr_sweeps = 0;
  std::int64_t dr_unconverged = 0;
  double dr_worst_residual = 0.0;
  double final_psnr(const std::string& method) const;
};

/// TV-constrained reconstruction of the enlarged Shepp-Logan phantom from clean
/// Radon measurements: projected PolyakSGM (eta = cfg.eta) against projected GD
/// with the 2^j grid (best final PSNR), snapshots at cfg.checkpoints.
CtResult run_ct_reconstruction(const ExperimentConfig& cfg);

/// Runs the experiment named by cfg.kind and writes its artifacts to cfg.out_dir.
void run_and_write(const ExperimentConfig& cfg);

}  // namespace polyct::experiments
