#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "polyct/analytics.hpp"
#include "polyct/error.hpp"
#include "polyct/experiments.hpp"

using namespace polyct;
using namespace polyct::experiments;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_phase() {
  auto c = ExperimentConfig::defaults(ExperimentKind::phase_transition);
  c.dim = 8;
  c.ratios = {4, 8};
  c.signal_norms = {1, 2};
  c.trials = 3;
  c.max_iters = 2000;
  c.gd_exponents = {-1, 0, 1};
  return c;
}

}  // namespace

TEST_CASE("config round trip and validation") {
  for (auto kind : {ExperimentKind::phase_transition, ExperimentKind::convergence,
                    ExperimentKind::robustness, ExperimentKind::noisy, ExperimentKind::ct}) {
    for (bool full : {false, true}) {
      auto c = ExperimentConfig::defaults(kind, full);
      c.tv_radius = kind == ExperimentKind::ct ? std::optional<double>(12.5) : std::nullopt;
      const auto back = ExperimentConfig::from_json(c.to_json());
      CHECK(back.to_json() == c.to_json());
      CHECK(back.hash() == c.hash());
      CHECK(parse_kind(to_string(kind)) == kind);
    }
  }
  auto c = tiny_phase();
  const auto h = c.hash();
  c.out_dir = "/somewhere";
  c.threads = 4;
  CHECK(c.hash() == h);
  c.seed = 2;
  CHECK(c.hash() != h);
  CHECK(c.hash_hex().size() == 16);

  auto code_of = [](const std::string& text) {
    try {
      ExperimentConfig::from_json(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io_error;
  };
  CHECK(code_of(R"({"kind": "noisy", "dimension": 3})") == ErrorCode::config_error);
  CHECK(code_of(R"({"kind": "sideways"})") == ErrorCode::config_error);
  CHECK(code_of(R"({"kind": "noisy", "dim": "many"})") == ErrorCode::config_error);
  CHECK(code_of(R"({"kind": "noisy", "eta": 2})") == ErrorCode::config_error);
  CHECK(code_of(R"({"kind": "ct", "checkpoints": [10, 5]})") == ErrorCode::config_error);
  CHECK(code_of(R"({"kind": "phase-transition", "ensemble": "rwht", "dim": 12})") ==
        ErrorCode::config_error);
  CHECK(code_of("not json") == ErrorCode::config_error);
}

TEST_CASE("parallel_for covers every index and propagates errors") {
  std::vector<int> hits(97, 0);
  parallel_for(97, 3, [&](std::int64_t i) { hits[static_cast<std::size_t>(i)] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 2,
                               [](std::int64_t i) {
                                 if (i == 7) throw Error(ErrorCode::numerical_failure, "x");
                               }),
                  Error);
}

TEST_CASE("phase transition is deterministic and thread independent") {
  auto c = tiny_phase();
  const auto a = run_phase_transition(c);
  c.threads = 3;
  const auto b = run_phase_transition(c);
  REQUIRE(a.cells.size() == 4);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].polyak_successes == b.cells[i].polyak_successes);
    CHECK(a.cells[i].gd_successes == b.cells[i].gd_successes);
  }
  CHECK(a.cell(1, 8).polyak_probability() == 1.0);
  CHECK_THROWS_AS(a.cell(3, 8), Error);
}

TEST_CASE("well-sampled corner of the phase diagram") {
  auto c = ExperimentConfig::defaults(ExperimentKind::phase_transition);
  c.ratios = {16};
  c.signal_norms = {1};
  c.gd_exponents = {0};
  const auto res = run_phase_transition(c);
  CHECK(res.cell(1, 16).polyak_probability() >= 0.9);
}

TEST_CASE("gd fails at large norm and low sampling") {
  auto c = ExperimentConfig::defaults(ExperimentKind::phase_transition);
  c.ratios = {2};
  c.signal_norms = {8};
  c.trials = 10;
  c.max_iters = 3000;
  const auto res = run_phase_transition(c);
  CHECK(res.cell(8, 2).gd_probability() <= 0.1);
}

TEST_CASE("theory-stepsize race at m = d r^4") {
  auto c = ExperimentConfig::defaults(ExperimentKind::convergence);
  c.stepsizes = "theory";
  c.dim = 64;
  c.signal_norms = {4};
  c.max_iters = 2000;
  c.trace_every = 100;
  const auto res = run_convergence(c);
  const MethodTrace* polyak = nullptr;
  const MethodTrace* gd = nullptr;
  for (const auto& r : res.runs) {
    if (r.method == "polyak") polyak = &r;
    if (r.method == "gd") gd = &r;
  }
  REQUIRE(polyak);
  REQUIRE(gd);
  CHECK(polyak->ratio == 256.0);
  CHECK(polyak->parameter == doctest::Approx(1.0 / analytics::kappa_bound(4.0)));
  CHECK(polyak->trace.iterations == gd->trace.iterations);
  CHECK(polyak->final_distance < gd->final_distance);
}

TEST_CASE("optimized race: polyak contracts and the adaptive method stays within a constant") {
  auto c = ExperimentConfig::defaults(ExperimentKind::convergence);
  c.dim = 32;
  c.ratios = {8};
  c.signal_norms = {1};
  c.max_iters = 3000;
  c.trace_every = 1;
  const auto res = run_convergence(c);
  for (const auto& r : res.runs) {
    if (r.method != "polyak") continue;
    const auto& recs = r.trace.records;
    // Distance ratio over blocks of 10^3 iterations (or to the end of the run).
    for (std::size_t k = 0; k + 1 < recs.size(); k += 1000) {
      const std::size_t next = std::min(k + 1000, recs.size() - 1);
      if (recs[next].dist < 1e-10) break;  // machine-precision floor
      CHECK(recs[next].dist / recs[k].dist < 1.0);
    }
  }
  // Adaptive evaluations against the fixed eta = 1 / kappa run to the same accuracy.
  const Instance inst = make_instance(c, 256, 1.0, 42, false);
  loss::Objective f(inst.ensemble, inst.measurements, loss::LossKind::l1);
  const Vector x0 = Vector::Zero(32);
  const auto ad = solvers::ad_polyak_sgm(f, x0, 1e-3);
  solvers::SolveOptions o;
  o.eta = 1.0 / analytics::kappa_bound(1.0);
  o.max_iters = 10000000;
  o.value_tolerance = 1e-3 * f.value(x0);
  o.trace_every = 1000000;
  const auto fixed = solvers::polyak_sgm(f, x0, o);
  CHECK(ad.total_evals <= 8 * fixed.trace.evals);
}

TEST_CASE("robustness table bookkeeping and spread") {
  auto c = ExperimentConfig::defaults(ExperimentKind::robustness);
  const auto res = run_robustness(c);
  REQUIRE(res.rows.size() == c.eta_grid.size() + c.gd_exponents.size());
  const RobustnessRow* best_polyak = nullptr;
  const RobustnessRow* best_gd = nullptr;
  for (const auto& row : res.rows) {
    for (std::size_t i = 0; i < row.iterations.size(); ++i) {
      if (row.capped[i]) CHECK(row.iterations[i] == c.max_iters);
      CHECK(row.iterations[i] <= c.max_iters);
    }
    auto& best = row.method == "polyak" ? best_polyak : best_gd;
    if (!best || row.median < best->median) best = &row;
  }
  REQUIRE(best_polyak);
  REQUIRE(best_gd);
  CHECK(best_polyak->median <= best_gd->median);
  CHECK(best_polyak->stddev <= best_gd->stddev);
  CHECK(run_robustness(c).rows[3].iterations == res.rows[3].iterations);
}

TEST_CASE("noisy experiment") {
  auto c = ExperimentConfig::defaults(ExperimentKind::noisy);
  c.dim = 32;
  c.signal_norms = {2};
  c.trials = 2;
  c.trace_every = 10;
  const auto res = run_noisy(c);
  REQUIRE(res.runs.size() == 2);
  for (const auto& r : res.runs) {
    CHECK(r.noopt.evals == 10000);
    CHECK(r.gd.evals <= 10000);
    CHECK(r.noopt_evals_to_2x <= r.noopt.evals);
    CHECK(r.noopt_final_distance > 0.0);
  }

  c.noise = false;
  c.trials = 1;
  c.t_outer = 2;
  c.t_inner = 3000;
  const auto clean = run_noisy(c);
  CHECK(clean.runs[0].noopt_final_distance <= 1e-5);

  solvers::SolveTrace t;
  t.evals = 50;
  t.records = {{0, 1, 1, 1, 4.0, 0, 0}, {1, 1, 1, 1, 1.9, 7, 0}, {2, 1, 1, 1, 1.0, 9, 0}};
  CHECK(evals_to_within(t, 1.0, 2.0) == 7);
  CHECK(evals_to_within(t, 0.1, 2.0) == 50);
}

TEST_CASE("ct reconstruction artifacts") {
  auto c = ExperimentConfig::defaults(ExperimentKind::ct);
  c.image_side = 16;
  c.n_angles = 8;
  c.checkpoints = {20, 40};
  c.gd_exponents = {0, 2};
  c.out_dir = (std::filesystem::temp_directory_path() / "polyct_ct_test").string();
  std::filesystem::remove_all(c.out_dir);
  const auto res = run_ct_reconstruction(c);
  CHECK(res.lambda == doctest::Approx(tv::tv_norm(res.truth)));
  CHECK(res.snapshots.size() == 4);
  for (const auto& s : res.snapshots) CHECK(s.tv <= res.lambda * (1.0 + 1e-6));

  run_and_write(c);
  const std::filesystem::path dir(c.out_dir);
  for (const char* name : {"config.json", "summary.json", "ct_psnr.csv", "truth.pgm", "phantom.json",
                           "polyak_40.pgm", "gd_20.csv"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  const std::string first = slurp(dir / "ct_psnr.csv");
  CHECK(first.rfind("# config_hash=" + c.hash_hex(), 0) == 0);
  run_and_write(ExperimentConfig::load((dir / "config.json").string()));
  CHECK(slurp(dir / "ct_psnr.csv") == first);
  std::filesystem::remove_all(dir);
}
