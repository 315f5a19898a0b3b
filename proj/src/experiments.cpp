#include "polyct/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "polyct/analytics.hpp"
#include "polyct/error.hpp"
#include "polyct/imaging.hpp"
#include "polyct/rng.hpp"

namespace polyct::experiments {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double distance(const Vector& x, const Vector& truth) { return (x - truth).norm(); }

std::int64_t samples_for(const ExperimentConfig& cfg, double ratio) {
  return static_cast<std::int64_t>(std::llround(ratio * static_cast<double>(cfg.dim)));
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

class CsvFile {
 public:
  CsvFile(const fs::path& path, const ExperimentConfig& cfg, const std::string& header)
      : out_(path) {
    if (!out_) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    out_ << "# config_hash=" << cfg.hash_hex() << " seed=" << cfg.seed << '\n' << header << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <typename T>
    requires std::is_integral_v<T>
  static std::string cell(T v) { return std::to_string(v); }
  std::ofstream out_;
};

void write_trace_rows(CsvFile& csv, const MethodTrace& run) {
  for (const auto& r : run.trace.records) {
    csv.row(run.method, run.signal_norm, run.ratio, run.trial, static_cast<std::int64_t>(r.round),
            r.k, r.evals, r.f, r.grad_norm, r.step, r.dist);
  }
}

const char* kTraceHeader = "method,signal_norm,ratio,trial,round,k,evals,f,grad_norm,step,dist";

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  out << j.dump(2) << '\n';
}

json trace_summary(const solvers::SolveTrace& t) {
  return {{"status", solvers::to_string(t.status)},
          {"iterations", t.iterations},
          {"evals", t.evals},
          {"final_value", t.final_value},
          {"wall_seconds", t.wall_seconds}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

const char* to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::phase_transition: return "phase-transition";
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::robustness: return "robustness";
    case ExperimentKind::noisy: return "noisy";
    case ExperimentKind::ct: return "ct";
  }
  return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
  for (auto k : {ExperimentKind::phase_transition, ExperimentKind::convergence,
                 ExperimentKind::robustness, ExperimentKind::noisy, ExperimentKind::ct}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::config_error, "unknown experiment kind '" + name + "'");
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["kind"] = experiments::to_string(kind);
  j["ensemble"] = ensemble;
  j["dim"] = dim;
  j["ratios"] = ratios;
  j["signal_norms"] = signal_norms;
  j["trials"] = trials;
  j["seed"] = seed;
  j["max_iters"] = max_iters;
  j["tolerance"] = tolerance;
  j["eta"] = eta;
  j["gd_exponents"] = gd_exponents;
  j["eta_grid"] = eta_grid;
  j["stepsizes"] = stepsizes;
  j["gd_c0"] = gd_c0;
  j["adaptive_eps"] = adaptive_eps;
  j["noise"] = noise;
  j["detector_scale"] = detector_scale;
  j["t_inner"] = t_inner;
  j["t_outer"] = t_outer;
  j["image_side"] = image_side;
  j["n_angles"] = n_angles;
  j["n_detectors"] = n_detectors;
  j["center_radius_factor"] = center_radius_factor;
  j["center_intensity"] = center_intensity;
  j["global_scale"] = global_scale;
  j["phantom_table"] = phantom_table;
  j["tv_radius"] = tv_radius ? json(*tv_radius) : json(nullptr);
  j["checkpoints"] = checkpoints;
  j["dr_tol"] = dr_tol;
  j["dr_max_sweeps"] = dr_max_sweeps;
  j["dr_warm_start"] = dr_warm_start;
  j["trace_every"] = trace_every;
  j["threads"] = threads;
  j["out_dir"] = out_dir;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::config_error, "config must be a JSON object");
  ExperimentConfig c;
  if (j.contains("kind")) c = defaults(parse_kind(j.at("kind").get<std::string>()));
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "kind") continue;
      else if (key == "ensemble") c.ensemble = v.get<std::string>();
      else if (key == "dim") c.dim = v.get<std::int64_t>();
      else if (key == "ratios") c.ratios = v.get<std::vector<double>>();
      else if (key == "signal_norms") c.signal_norms = v.get<std::vector<double>>();
      else if (key == "trials") c.trials = v.get<std::int64_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "max_iters") c.max_iters = v.get<std::int64_t>();
      else if (key == "tolerance") c.tolerance = v.get<double>();
      else if (key == "eta") c.eta = v.get<double>();
      else if (key == "gd_exponents") c.gd_exponents = v.get<std::vector<int>>();
      else if (key == "eta_grid") c.eta_grid = v.get<std::vector<double>>();
      else if (key == "stepsizes") c.stepsizes = v.get<std::string>();
      else if (key == "gd_c0") c.gd_c0 = v.get<double>();
      else if (key == "adaptive_eps") c.adaptive_eps = v.get<double>();
      else if (key == "noise") c.noise = v.get<bool>();
      else if (key == "detector_scale") c.detector_scale = v.get<double>();
      else if (key == "t_inner") c.t_inner = v.get<std::int64_t>();
      else if (key == "t_outer") c.t_outer = v.get<std::int64_t>();
      else if (key == "image_side") c.image_side = v.get<std::int64_t>();
      else if (key == "n_angles") c.n_angles = v.get<std::int64_t>();
      else if (key == "n_detectors") c.n_detectors = v.get<std::int64_t>();
      else if (key == "center_radius_factor") c.center_radius_factor = v.get<double>();
      else if (key == "center_intensity") c.center_intensity = v.get<double>();
      else if (key == "global_scale") c.global_scale = v.get<double>();
      else if (key == "phantom_table") c.phantom_table = v.get<std::string>();
      else if (key == "tv_radius") {
        if (v.is_null()) c.tv_radius.reset();
        else c.tv_radius = v.get<double>();
      }
      else if (key == "checkpoints") c.checkpoints = v.get<std::vector<std::int64_t>>();
      else if (key == "dr_tol") c.dr_tol = v.get<double>();
      else if (key == "dr_max_sweeps") c.dr_max_sweeps = v.get<std::int64_t>();
      else if (key == "dr_warm_start") c.dr_warm_start = v.get<bool>();
      else if (key == "trace_every") c.trace_every = v.get<std::int64_t>();
      else if (key == "threads") c.threads = v.get<std::int64_t>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else throw Error(ErrorCode::config_error, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config_error, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path);
  out << to_json() << '\n';
}

std::uint64_t ExperimentConfig::hash() const {
  json j = json::parse(to_json());
  j.erase("out_dir");
  j.erase("threads");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::config_error, what); };
  if (ensemble != "gaussian" && ensemble != "rwht") fail("ensemble must be gaussian or rwht");
  if (dim < 1) fail("dim must be >= 1");
  if (ensemble == "rwht" && !sensing::is_power_of_two(dim)) fail("rwht needs a power-of-two dim");
  if (trials < 1) fail("trials must be >= 1");
  if (max_iters < 1) fail("max_iters must be >= 1");
  if (!(tolerance > 0.0)) fail("tolerance must be > 0");
  if (!(eta > 0.0 && eta <= 1.0)) fail("eta must lie in (0, 1]");
  if (stepsizes != "optimized" && stepsizes != "theory") fail("stepsizes must be optimized or theory");
  if (!(detector_scale > 0.0)) fail("detector_scale must be > 0");
  if (t_inner < 1 || t_outer < 1) fail("t_inner and t_outer must be >= 1");
  if (trace_every < 1) fail("trace_every must be >= 1");
  if (threads < 1) fail("threads must be >= 1");
  if (!(adaptive_eps > 0.0 && adaptive_eps < 1.0)) fail("adaptive_eps must lie in (0, 1)");
  for (double r : ratios) {
    if (!(r >= 1.0)) fail("ratios must be >= 1");
    if (ensemble == "rwht" && r != std::floor(r)) fail("rwht ratios must be integers");
  }
  for (double r : signal_norms) {
    if (!(r > 0.0)) fail("signal norms must be > 0");
  }
  for (double e : eta_grid) {
    if (!(e > 0.0 && e <= 1.0)) fail("eta_grid entries must lie in (0, 1]");
  }
  if (kind == ExperimentKind::ct) {
    if (image_side < 2 || n_angles < 1 || n_detectors < 0) fail("bad imaging geometry");
    if (phantom_table != "original" && phantom_table != "modified") fail("unknown phantom table");
    if (checkpoints.empty()) fail("checkpoints must be nonempty");
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
      if (checkpoints[k] < 1 || (k > 0 && checkpoints[k] <= checkpoints[k - 1])) {
        fail("checkpoints must be positive and increasing");
      }
    }
    if (tv_radius && !(*tv_radius > 0.0)) fail("tv_radius must be > 0");
    if (!(dr_tol > 0.0) || dr_max_sweeps < 1) fail("bad DR settings");
  } else {
    if (signal_norms.empty()) fail("signal_norms must be nonempty");
    if (kind != ExperimentKind::convergence || stepsizes == "optimized") {
      if (ratios.empty()) fail("ratios must be nonempty");
    }
  }
  if (gd_exponents.empty()) fail("gd_exponents must be nonempty");
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind, bool full_scale) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::phase_transition:
      c.dim = full_scale ? 128 : 32;
      c.ratios = {2, 4, 6, 8, 10, 12, 14, 16};
      c.signal_norms = {1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5, 5.5, 6, 6.5, 7, 7.5, 8};
      if (!full_scale) {
        c.ratios = {2, 4, 8, 16};
        c.signal_norms = {1, 2, 4, 8};
      }
      c.trials = 25;
      c.noise = false;
      c.trace_every = 1000;
      break;
    case ExperimentKind::convergence:
      c.dim = full_scale ? 256 : 64;
      c.ratios = {4, 8};
      c.signal_norms = {1, 2, 4};
      c.trials = 1;
      c.max_iters = full_scale ? 10000 : 2000;
      c.noise = false;
      c.trace_every = 10;
      break;
    case ExperimentKind::robustness:
      c.dim = full_scale ? 256 : 64;
      c.ratios = {4};
      c.signal_norms = {1};
      c.trials = 10;
      c.noise = false;
      c.trace_every = 1000;
      break;
    case ExperimentKind::noisy:
      c.dim = full_scale ? 128 : 64;
      c.ratios = {8};
      c.signal_norms = {2, 3, 4, 5};
      c.trials = full_scale ? 1 : 10;
      c.noise = true;
      c.detector_scale = 1e5;
      c.t_inner = 1000;
      c.t_outer = 10;
      c.trace_every = 1;
      break;
    case ExperimentKind::ct:
      c.image_side = full_scale ? 128 : 64;
      c.n_angles = full_scale ? 60 : 30;
      c.checkpoints = full_scale ? std::vector<std::int64_t>{1000, 5000, 10000}
                                  : std::vector<std::int64_t>{500, 1000, 2000};
      c.trials = 1;
      c.noise = false;
      c.trace_every = 100;
      break;
  }
  return c;
}

void parallel_for(std::int64_t count, std::int64_t threads,
                  const std::function<void(std::int64_t)>& body) {
  if (count <= 0) return;
  const std::int64_t workers = std::min<std::int64_t>(std::max<std::int64_t>(threads, 1), count);
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::int64_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::int64_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Shared pieces

Instance make_instance(const ExperimentConfig& cfg, std::int64_t samples, double signal_norm,
                       std::uint64_t seed, bool noisy) {
  Vector truth = sensing::sample_signal(cfg.dim, signal_norm, derive_seed(seed, 2));
  sensing::SensingEnsemble ensemble =
      cfg.ensemble == "rwht"
          ? sensing::rwht_ensemble(cfg.dim, samples / cfg.dim, derive_seed(seed, 1))
          : sensing::gaussian_ensemble(cfg.dim, samples, derive_seed(seed, 1));
  const auto noise = noisy ? sensing::NoiseModel::poisson_gaussian(cfg.detector_scale)
                           : sensing::NoiseModel::clean();
  sensing::MeasurementSet ms =
      sensing::generate_measurements(ensemble, truth, noise, derive_seed(seed, 3));
  return {std::move(truth), std::move(ensemble), std::move(ms)};
}

GridChoice gd_grid_search(const loss::Objective& squared, const Vector& x0, double signal_norm,
                          const std::vector<int>& exponents, const solvers::GdOptions& options) {
  const auto& truth = squared.measurements().truth;
  GridChoice best;
  double best_score = kInf;
  bool have = false;
  for (int j : exponents) {
    const auto schedule = analytics::gd_constant_schedule(signal_norm, std::ldexp(1.0, j));
    double score = kInf;
    solvers::SolveResult run;
    try {
      run = solvers::gradient_descent(squared, x0, schedule, options);
      score = truth ? distance(run.x, *truth) : run.trace.final_value;
      if (!std::isfinite(score)) score = kInf;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::numerical_failure) throw;
      run = {x0, {}};
      run.trace.final_value = kInf;
    }
    if (!have || score < best_score) {
      have = true;
      best_score = score;
      best = {j, std::move(run)};
    }
  }
  return best;
}

std::int64_t evals_to_within(const solvers::SolveTrace& trace, double target, double factor) {
  for (const auto& r : trace.records) {
    if (r.dist <= factor * target) return r.evals;
  }
  return trace.evals;
}

// ---------------------------------------------------------------------------
// Phase transition

const PhaseCell& PhaseTransitionResult::cell(double signal_norm, double ratio) const {
  for (const auto& c : cells) {
    if (c.signal_norm == signal_norm && c.ratio == ratio) return c;
  }
  throw Error(ErrorCode::invalid_argument, "no such phase-transition cell");
}

PhaseTransitionResult run_phase_transition(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::int64_t n_cells = static_cast<std::int64_t>(cfg.signal_norms.size() * cfg.ratios.size());
  const std::int64_t tasks = n_cells * cfg.trials;
  std::vector<std::uint8_t> polyak_ok(static_cast<std::size_t>(tasks));
  std::vector<std::uint8_t> gd_ok(static_cast<std::size_t>(tasks));
  parallel_for(tasks, cfg.threads, [&](std::int64_t task) {
    const std::int64_t cell = task / cfg.trials;
    const std::int64_t trial = task % cfg.trials;
    const double r = cfg.signal_norms[static_cast<std::size_t>(cell) / cfg.ratios.size()];
    const double ratio = cfg.ratios[static_cast<std::size_t>(cell) % cfg.ratios.size()];
    const Instance inst = make_instance(cfg, samples_for(cfg, ratio), r,
                                        derive_seed(cfg.seed, static_cast<std::uint64_t>(cell),
                                                    static_cast<std::uint64_t>(trial)),
                                        false);
    const Vector x0 = Vector::Zero(cfg.dim);
    loss::Objective l1(inst.ensemble, inst.measurements, loss::LossKind::l1);
    solvers::SolveOptions po;
    po.eta = cfg.eta;
    po.max_iters = cfg.max_iters;
    po.distance_tolerance = cfg.tolerance;
    po.trace_every = cfg.trace_every;
    const auto pr = solvers::polyak_sgm(l1, x0, po);
    polyak_ok[static_cast<std::size_t>(task)] = distance(pr.x, inst.truth) <= cfg.tolerance;

    loss::Objective sq(inst.ensemble, inst.measurements, loss::LossKind::squared);
    solvers::GdOptions go;
    go.max_iters = cfg.max_iters;
    go.distance_tolerance = cfg.tolerance;
    go.trace_every = cfg.trace_every;
    const GridChoice g = gd_grid_search(sq, x0, r, cfg.gd_exponents, go);
    gd_ok[static_cast<std::size_t>(task)] = distance(g.result.x, inst.truth) <= cfg.tolerance;
  });

  PhaseTransitionResult out;
  for (std::int64_t cell = 0; cell < n_cells; ++cell) {
    PhaseCell c;
    c.signal_norm = cfg.signal_norms[static_cast<std::size_t>(cell) / cfg.ratios.size()];
    c.ratio = cfg.ratios[static_cast<std::size_t>(cell) % cfg.ratios.size()];
    c.trials = cfg.trials;
    for (std::int64_t t = 0; t < cfg.trials; ++t) {
      c.polyak_successes += polyak_ok[static_cast<std::size_t>(cell * cfg.trials + t)];
      c.gd_successes += gd_ok[static_cast<std::size_t>(cell * cfg.trials + t)];
    }
    out.cells.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence races

ConvergenceResult run_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  const bool theory = cfg.stepsizes == "theory";
  const std::vector<double> ratios = theory ? std::vector<double>{0.0} : cfg.ratios;
  struct Task {
    double r;
    double ratio;
    std::int64_t trial;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t a = 0; a < cfg.signal_norms.size(); ++a) {
    for (std::size_t b = 0; b < ratios.size(); ++b) {
      for (std::int64_t t = 0; t < cfg.trials; ++t) {
        const double r = cfg.signal_norms[a];
        const double ratio = theory ? std::pow(r, 4.0) : ratios[b];
        tasks.push_back({r, ratio, t,
                         derive_seed(cfg.seed, a * ratios.size() + b, static_cast<std::uint64_t>(t))});
      }
    }
  }
  std::vector<std::vector<MethodTrace>> slots(tasks.size());
  parallel_for(static_cast<std::int64_t>(tasks.size()), cfg.threads, [&](std::int64_t i) {
    const Task& task = tasks[static_cast<std::size_t>(i)];
    const std::int64_t m = samples_for(cfg, task.ratio);
    const Instance inst = make_instance(cfg, m, task.r, task.seed, false);
    const Vector x0 = Vector::Zero(cfg.dim);
    loss::Objective l1(inst.ensemble, inst.measurements, loss::LossKind::l1);
    loss::Objective sq(inst.ensemble, inst.measurements, loss::LossKind::squared);
    auto& out = slots[static_cast<std::size_t>(i)];
    auto push = [&](std::string method, double parameter, solvers::SolveTrace trace,
                    const Vector& x) {
      out.push_back({std::move(method), task.r, task.ratio, task.trial, parameter,
                     std::move(trace), distance(x, inst.truth)});
    };

    solvers::SolveOptions po;
    po.eta = theory ? 1.0 / analytics::kappa_bound(task.r) : cfg.eta;
    po.max_iters = cfg.max_iters;
    po.trace_every = cfg.trace_every;
    auto pr = solvers::polyak_sgm(l1, x0, po);
    push("polyak", po.eta, std::move(pr.trace), pr.x);

    solvers::AdaptiveOptions ao;
    ao.trace_every = cfg.trace_every;
    auto ar = solvers::ad_polyak_sgm(l1, x0, cfg.adaptive_eps, ao);
    push("adaptive", static_cast<double>(ar.rounds.size()), std::move(ar.trace), ar.x);

    solvers::GdOptions go;
    go.max_iters = cfg.max_iters;
    go.trace_every = cfg.trace_every;
    if (theory) {
      try {
        auto gr = solvers::gradient_descent(sq, x0, analytics::gd_stepsize_schedule(task.r, cfg.gd_c0), go);
        push("gd", cfg.gd_c0 * std::exp(-5.0 * task.r), std::move(gr.trace), gr.x);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::numerical_failure) throw;
        solvers::SolveTrace failed;
        failed.final_value = kInf;
        push("gd", cfg.gd_c0 * std::exp(-5.0 * task.r), std::move(failed),
             Vector::Constant(cfg.dim, kInf));
      }
    } else {
      GridChoice g = gd_grid_search(sq, x0, task.r, cfg.gd_exponents, go);
      push("gd", std::ldexp(1.0, g.exponent), std::move(g.result.trace), g.result.x);
    }
  });
  ConvergenceResult result;
  for (auto& s : slots) {
    for (auto& run : s) result.runs.push_back(std::move(run));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Stepsize robustness

RobustnessResult run_robustness(const ExperimentConfig& cfg) {
  cfg.validate();
  const double r = cfg.signal_norms.front();
  const double ratio = cfg.ratios.front();
  const std::size_t n_polyak = cfg.eta_grid.size();
  const std::size_t n_rows = n_polyak + cfg.gd_exponents.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::vector<std::int64_t> iters(n_rows * trials);
  std::vector<std::uint8_t> capped(n_rows * trials);
  parallel_for(static_cast<std::int64_t>(n_rows * trials), cfg.threads, [&](std::int64_t task) {
    const std::size_t row = static_cast<std::size_t>(task) / trials;
    const std::size_t trial = static_cast<std::size_t>(task) % trials;
    const Instance inst = make_instance(cfg, samples_for(cfg, ratio), r,
                                        derive_seed(cfg.seed, 0, trial), false);
    const Vector x0 = Vector::Zero(cfg.dim);
    solvers::SolveTrace trace;
    bool reached = false;
    if (row < n_polyak) {
      loss::Objective l1(inst.ensemble, inst.measurements, loss::LossKind::l1);
      solvers::SolveOptions po;
      po.eta = cfg.eta_grid[row];
      po.max_iters = cfg.max_iters;
      po.distance_tolerance = cfg.tolerance;
      po.trace_every = cfg.trace_every;
      const auto res = solvers::polyak_sgm(l1, x0, po);
      reached = distance(res.x, inst.truth) <= cfg.tolerance;
      trace = res.trace;
    } else {
      loss::Objective sq(inst.ensemble, inst.measurements, loss::LossKind::squared);
      solvers::GdOptions go;
      go.max_iters = cfg.max_iters;
      go.distance_tolerance = cfg.tolerance;
      go.trace_every = cfg.trace_every;
      const double step = std::ldexp(1.0, cfg.gd_exponents[row - n_polyak]);
      try {
        const auto res =
            solvers::gradient_descent(sq, x0, analytics::gd_constant_schedule(r, step), go);
        reached = distance(res.x, inst.truth) <= cfg.tolerance;
        trace = res.trace;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::numerical_failure) throw;
      }
    }
    iters[static_cast<std::size_t>(task)] = reached ? trace.iterations : cfg.max_iters;
    capped[static_cast<std::size_t>(task)] = !reached;
  });
  RobustnessResult out;
  for (std::size_t row = 0; row < n_rows; ++row) {
    RobustnessRow rr;
    rr.method = row < n_polyak ? "polyak" : "gd";
    rr.stepsize = row < n_polyak ? cfg.eta_grid[row]
                                 : std::ldexp(1.0, cfg.gd_exponents[row - n_polyak]);
    std::vector<double> values;
    for (std::size_t t = 0; t < trials; ++t) {
      rr.iterations.push_back(iters[row * trials + t]);
      rr.capped.push_back(capped[row * trials + t] != 0);
      values.push_back(static_cast<double>(iters[row * trials + t]));
    }
    rr.median = median(values);
    rr.stddev = stddev(values);
    out.rows.push_back(std::move(rr));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noisy measurements

NoisyResult run_noisy(const ExperimentConfig& cfg) {
  cfg.validate();
  const double ratio = cfg.ratios.front();
  const std::size_t n_norms = cfg.signal_norms.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::vector<NoisyRun> runs(n_norms * trials);
  parallel_for(static_cast<std::int64_t>(runs.size()), cfg.threads, [&](std::int64_t task) {
    const std::size_t a = static_cast<std::size_t>(task) / trials;
    const std::size_t t = static_cast<std::size_t>(task) % trials;
    const double r = cfg.signal_norms[a];
    const Instance inst = make_instance(cfg, samples_for(cfg, ratio), r,
                                        derive_seed(cfg.seed, a, t), cfg.noise);
    const Vector x0 = Vector::Zero(cfg.dim);
    loss::Objective l1(inst.ensemble, inst.measurements, loss::LossKind::l1);
    loss::Objective sq(inst.ensemble, inst.measurements, loss::LossKind::squared);
    NoisyRun& run = runs[static_cast<std::size_t>(task)];
    run.signal_norm = r;
    run.trial = static_cast<std::int64_t>(t);
    run.detector_scale = cfg.noise ? cfg.detector_scale : 0.0;

    solvers::NoOptOptions no;
    no.trace_every = cfg.trace_every;
    auto nr = solvers::polyak_sgm_noopt(l1, x0, 0.0, cfg.eta, cfg.t_inner, cfg.t_outer, no);
    run.noopt_final_distance = distance(nr.x, inst.truth);
    run.noopt = std::move(nr.trace);

    solvers::GdOptions go;
    go.max_iters = cfg.t_inner * cfg.t_outer;
    go.trace_every = cfg.trace_every;
    GridChoice g = gd_grid_search(sq, x0, r, cfg.gd_exponents, go);
    run.gd_exponent = g.exponent;
    run.gd_final_distance = distance(g.result.x, inst.truth);
    run.gd = std::move(g.result.trace);
    run.noopt_evals_to_2x = evals_to_within(run.noopt, run.noopt_final_distance, 2.0);
    run.gd_evals_to_2x = evals_to_within(run.gd, run.gd_final_distance, 2.0);
  });
  return {std::move(runs)};
}

// ---------------------------------------------------------------------------
// CT reconstruction

double CtResult::final_psnr(const std::string& method) const {
  double value = std::numeric_limits<double>::quiet_NaN();
  std::int64_t last = -1;
  for (const auto& s : snapshots) {
    if (s.method == method && s.iteration > last) {
      last = s.iteration;
      value = s.psnr;
    }
  }
  return value;
}

namespace {

struct ProjectedRun {
  std::vector<CtSnapshot> snapshots;
  double final_distance = kInf;
  std::int64_t projections = 0;
  std::int64_t sweeps = 0;
  std::int64_t unconverged = 0;
  double worst_residual = 0.0;
};

// Runs a memoryless first-order method in segments ending at each checkpoint,
// which yields the same iterates as one uninterrupted run.
template <typename Segment>
ProjectedRun run_in_segments(const std::string& method, const ExperimentConfig& cfg,
                             const tv::ImageVec& truth, double lambda, Segment segment) {
  const std::int64_t n = truth.side;
  tv::DrOptions dr;
  dr.tol = cfg.dr_tol;
  dr.max_sweeps = cfg.dr_max_sweeps;
  dr.throw_on_nonconvergence = false;
  tv::TvBallProjector projector(n, lambda, dr, cfg.dr_warm_start);
  ProjectedRun out;
  Vector x = Vector::Zero(n * n);
  std::int64_t done = 0;
  for (std::int64_t checkpoint : cfg.checkpoints) {
    x = segment(x, done, checkpoint - done, std::ref(projector));
    done = checkpoint;
    tv::ImageVec img(x, n);
    out.snapshots.push_back({method, checkpoint, imaging::psnr(img, truth), tv::tv_norm(img),
                             distance(x, truth.data), img});
  }
  out.final_distance = distance(x, truth.data);
  out.projections = projector.calls();
  out.sweeps = projector.total_sweeps();
  out.unconverged = projector.unconverged();
  out.worst_residual = projector.worst_residual();
  return out;
}

}  // namespace

CtResult run_ct_reconstruction(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::int64_t n = cfg.image_side;
  const auto table = cfg.phantom_table == "modified" ? imaging::PhantomTable::modified
                                                     : imaging::PhantomTable::original;
  CtResult out;
  out.truth = imaging::shepp_logan(n, cfg.center_radius_factor, cfg.center_intensity,
                                   cfg.global_scale, table);
  out.lambda = cfg.tv_radius ? *cfg.tv_radius : tv::tv_norm(out.truth);
  CounterRng rng(cfg.seed, make_stream(StreamTag::experiment, 0));
  const double offset = rng.uniform();
  const sensing::SensingEnsemble ensemble = imaging::radon_ensemble(
      n, cfg.n_angles, cfg.n_detectors > 0 ? cfg.n_detectors : n, offset);
  out.samples = ensemble.samples();
  const auto noise = cfg.noise ? sensing::NoiseModel::poisson_gaussian(cfg.detector_scale)
                               : sensing::NoiseModel::clean();
  const sensing::MeasurementSet ms =
      sensing::generate_measurements(ensemble, out.truth.data, noise, derive_seed(cfg.seed, 3));
  loss::Objective l1(ensemble, ms, loss::LossKind::l1);
  loss::Objective sq(ensemble, ms, loss::LossKind::squared);
  const double r = out.truth.data.norm();

  auto account = [&](const ProjectedRun& run) {
    out.projections += run.projections;
    out.dr_sweeps += run.sweeps;
    out.dr_unconverged += run.unconverged;
    out.dr_worst_residual = std::max(out.dr_worst_residual, run.worst_residual);
  };

  const ProjectedRun polyak = run_in_segments(
      "polyak", cfg, out.truth, out.lambda,
      [&](const Vector& x, std::int64_t, std::int64_t steps, solvers::Projection proj) {
        solvers::SolveOptions po;
        po.eta = cfg.eta;
        po.max_iters = steps;
        po.trace_every = cfg.trace_every;
        po.projection = std::move(proj);
        return solvers::polyak_sgm(l1, x, po).x;
      });
  account(polyak);
  for (const auto& s : polyak.snapshots) out.snapshots.push_back(s);

  ProjectedRun best_gd;
  bool have = false;
  for (int j : cfg.gd_exponents) {
    const auto full = analytics::gd_constant_schedule(r, std::ldexp(1.0, j));
    ProjectedRun run;
    try {
      run = run_in_segments(
          "gd", cfg, out.truth, out.lambda,
          [&](const Vector& x, std::int64_t done, std::int64_t steps, solvers::Projection proj) {
            solvers::GdOptions go;
            go.max_iters = steps;
            go.trace_every = cfg.trace_every;
            go.projection = std::move(proj);
            analytics::GdSchedule schedule = full;
            if (done > 0) schedule.initial = schedule.later;
            return solvers::gradient_descent(sq, x, schedule, go).x;
          });
    } catch (const Error& e) {
      if (e.code() != ErrorCode::numerical_failure) throw;
      continue;
    }
    account(run);
    if (!have || run.final_distance < best_gd.final_distance) {
      have = true;
      best_gd = std::move(run);
      out.gd_exponent = j;
    }
  }
  for (const auto& s : best_gd.snapshots) out.snapshots.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// Artifacts

void run_and_write(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.out_dir.empty()) throw Error(ErrorCode::config_error, "out_dir is required");
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  cfg.save((dir / "config.json").string());
  json summary{{"experiment", to_string(cfg.kind)},
               {"config_hash", cfg.hash_hex()},
               {"seed", cfg.seed}};
  const auto start = std::chrono::steady_clock::now();

  switch (cfg.kind) {
    case ExperimentKind::phase_transition: {
      const auto res = run_phase_transition(cfg);
      CsvFile csv(dir / "phase_transition.csv", cfg,
                  "signal_norm,ratio,trials,polyak_successes,gd_successes,polyak_probability,gd_probability");
      for (const auto& c : res.cells) {
        csv.row(c.signal_norm, c.ratio, c.trials, c.polyak_successes, c.gd_successes,
                c.polyak_probability(), c.gd_probability());
      }
      summary["cells"] = res.cells.size();
      break;
    }
    case ExperimentKind::convergence: {
      const auto res = run_convergence(cfg);
      CsvFile csv(dir / "convergence_traces.csv", cfg, kTraceHeader);
      json runs = json::array();
      for (const auto& run : res.runs) {
        write_trace_rows(csv, run);
        json s = trace_summary(run.trace);
        s["method"] = run.method;
        s["signal_norm"] = run.signal_norm;
        s["ratio"] = run.ratio;
        s["trial"] = run.trial;
        s["parameter"] = run.parameter;
        s["final_distance"] = run.final_distance;
        runs.push_back(s);
      }
      summary["runs"] = runs;
      break;
    }
    case ExperimentKind::robustness: {
      const auto res = run_robustness(cfg);
      CsvFile csv(dir / "robustness.csv", cfg, "method,stepsize,median,stddev,capped_runs,iterations");
      for (const auto& row : res.rows) {
        std::string its;
        for (std::size_t k = 0; k < row.iterations.size(); ++k) {
          if (k) its += ';';
          its += std::to_string(row.iterations[k]) + (row.capped[k] ? "*" : "");
        }
        csv.row(row.method, row.stepsize, row.median, row.stddev,
                static_cast<std::int64_t>(std::count(row.capped.begin(), row.capped.end(), true)),
                its);
      }
      break;
    }
    case ExperimentKind::noisy: {
      const auto res = run_noisy(cfg);
      CsvFile csv(dir / "noisy_traces.csv", cfg, kTraceHeader);
      CsvFile table(dir / "noisy_summary.csv", cfg,
                    "signal_norm,trial,detector_scale,gd_step,noopt_final_distance,gd_final_distance,"
                    "noopt_evals_to_2x,gd_evals_to_2x");
      for (const auto& run : res.runs) {
        write_trace_rows(csv, {"noopt", run.signal_norm, cfg.ratios.front(), run.trial, cfg.eta,
                               run.noopt, run.noopt_final_distance});
        write_trace_rows(csv, {"gd", run.signal_norm, cfg.ratios.front(), run.trial,
                               std::ldexp(1.0, run.gd_exponent), run.gd, run.gd_final_distance});
        table.row(run.signal_norm, run.trial, run.detector_scale, std::ldexp(1.0, run.gd_exponent),
                  run.noopt_final_distance, run.gd_final_distance, run.noopt_evals_to_2x,
                  run.gd_evals_to_2x);
      }
      break;
    }
    case ExperimentKind::ct: {
      const auto res = run_ct_reconstruction(cfg);
      CsvFile csv(dir / "ct_psnr.csv", cfg, "method,iteration,psnr,tv,distance");
      imaging::write_pgm16((dir / "truth.pgm").string(), res.truth, res.truth.data.maxCoeff());
      imaging::write_csv((dir / "truth.csv").string(), res.truth);
      const auto table = cfg.phantom_table == "modified" ? imaging::PhantomTable::modified
                                                         : imaging::PhantomTable::original;
      std::ofstream(dir / "phantom.json")
          << imaging::phantom_json(imaging::shepp_logan_phantom(
                 cfg.image_side, cfg.center_radius_factor, cfg.center_intensity, cfg.global_scale,
                 table))
          << '\n';
      for (const auto& s : res.snapshots) {
        csv.row(s.method, s.iteration, s.psnr, s.tv, s.distance);
        const std::string stem = s.method + "_" + std::to_string(s.iteration);
        imaging::write_pgm16((dir / (stem + ".pgm")).string(), s.image, res.truth.data.maxCoeff());
        imaging::write_csv((dir / (stem + ".csv")).string(), s.image);
      }
      summary["lambda"] = res.lambda;
      summary["samples"] = res.samples;
      summary["gd_step"] = std::ldexp(1.0, res.gd_exponent);
      summary["projections"] = res.projections;
      summary["dr_sweeps"] = res.dr_sweeps;
      summary["dr_unconverged"] = res.dr_unconverged;
      summary["dr_worst_residual"] = res.dr_worst_residual;
      summary["final_psnr"] = {{"polyak", res.final_psnr("polyak")}, {"gd", res.final_psnr("gd")}};
      break;
    }
  }
  summary["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(dir / "summary.json", summary);
}

}  // namespace polyct::experiments
