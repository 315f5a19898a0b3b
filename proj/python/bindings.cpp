#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "polyct/analytics.hpp"
#include "polyct/error.hpp"
#include "polyct/experiments.hpp"
#include "polyct/imaging.hpp"
#include "polyct/loss.hpp"
#include "polyct/solvers.hpp"
#include "polyct/tv.hpp"

namespace py = pybind11;
using namespace polyct;

namespace {

// Owns the ensemble and measurements the objectives point into.
struct Problem {
  std::unique_ptr<experiments::Instance> inst;

  loss::Objective objective(const std::string& kind) const {
    if (kind == "l1") return {inst->ensemble, inst->measurements, loss::LossKind::l1};
    if (kind == "squared") return {inst->ensemble, inst->measurements, loss::LossKind::squared};
    throw Error(ErrorCode::invalid_argument, "loss kind must be 'l1' or 'squared'");
  }
};

Problem make_problem(std::int64_t dim, double ratio, double signal_norm, std::uint64_t seed,
                     const std::string& ensemble, std::optional<double> detector_scale) {
  experiments::ExperimentConfig cfg;
  cfg.dim = dim;
  cfg.ensemble = ensemble;
  cfg.noise = detector_scale.has_value();
  if (detector_scale) cfg.detector_scale = *detector_scale;
  const auto samples = static_cast<std::int64_t>(ratio * static_cast<double>(dim));
  return {std::make_unique<experiments::Instance>(
      experiments::make_instance(cfg, samples, signal_norm, seed, cfg.noise))};
}

py::dict trace_dict(const solvers::SolveTrace& t) {
  const auto n = t.records.size();
  std::vector<std::int64_t> k(n), evals(n);
  std::vector<double> f(n), dist(n), step(n);
  for (std::size_t i = 0; i < n; ++i) {
    k[i] = t.records[i].k;
    evals[i] = t.records[i].evals;
    f[i] = t.records[i].f;
    dist[i] = t.records[i].dist;
    step[i] = t.records[i].step;
  }
  py::dict d;
  d["k"] = k;
  d["evals"] = evals;
  d["f"] = f;
  d["dist"] = dist;
  d["step"] = step;
  d["status"] = solvers::to_string(t.status);
  d["iterations"] = t.iterations;
  d["total_evals"] = t.evals;
  d["final_value"] = t.final_value;
  return d;
}

py::dict result_dict(const Vector& x, const solvers::SolveTrace& t) {
  py::dict d = trace_dict(t);
  d["x"] = x;
  return d;
}

}  // namespace

PYBIND11_MODULE(_polyct, m) {
  m.doc() = "Polyak subgradient recovery for CT-style sensing";

  static py::exception<Error> error(m, "PolyctError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  m.def("erfc", &analytics::erfc);
  m.def("exp_pos_moment", &analytics::exp_pos_moment, py::arg("c"));
  m.def("exp_plus_moment", &analytics::exp_plus_moment, py::arg("c"));
  m.def("expected_loss_at_zero", &analytics::expected_loss_at_zero, py::arg("r"));
  m.def("mu_bound", &analytics::mu_bound, py::arg("r"));
  m.def("lipschitz_bound", &analytics::lipschitz_bound, py::arg("dim"), py::arg("samples"));
  m.def("kappa_bound", &analytics::kappa_bound, py::arg("r"));

  py::class_<Problem>(m, "Problem")
      .def(py::init(&make_problem), py::arg("dim"), py::arg("ratio"), py::arg("signal_norm"),
           py::arg("seed") = 1, py::arg("ensemble") = "gaussian",
           py::arg("detector_scale") = py::none())
      .def_property_readonly("dim", [](const Problem& p) { return p.inst->ensemble.dim(); })
      .def_property_readonly("samples", [](const Problem& p) { return p.inst->ensemble.samples(); })
      .def_property_readonly("truth", [](const Problem& p) { return p.inst->truth; })
      .def_property_readonly("y", [](const Problem& p) { return p.inst->measurements.y; })
      .def("loss", [](const Problem& p, const Vector& x, const std::string& kind) {
             return p.objective(kind).value(x);
           }, py::arg("x"), py::arg("kind") = "l1")
      .def("direction", [](const Problem& p, const Vector& x, const std::string& kind) {
             return p.objective(kind).direction(x);
           }, py::arg("x"), py::arg("kind") = "l1")
      .def("polyak", [](const Problem& p, const Vector& x0, double eta, std::int64_t max_iters,
                        double f_star, std::optional<double> tolerance) {
             solvers::SolveOptions o;
             o.eta = eta;
             o.max_iters = max_iters;
             o.f_star = f_star;
             o.distance_tolerance = tolerance;
             const auto r = solvers::polyak_sgm(p.objective("l1"), x0, o);
             return result_dict(r.x, r.trace);
           }, py::arg("x0"), py::arg("eta") = 1.0, py::arg("max_iters") = 1000,
           py::arg("f_star") = 0.0, py::arg("tolerance") = py::none())
      .def("ad_polyak", [](const Problem& p, const Vector& x0, double eps) {
             const auto r = solvers::ad_polyak_sgm(p.objective("l1"), x0, eps);
             py::dict d = result_dict(r.x, r.trace);
             d["rounds"] = r.rounds.size();
             return d;
           }, py::arg("x0"), py::arg("eps") = 1e-3)
      .def("noopt", [](const Problem& p, const Vector& x0, double f_lb, double eta,
                       std::int64_t t_inner, std::int64_t t_outer) {
             const auto r = solvers::polyak_sgm_noopt(p.objective("l1"), x0, f_lb, eta, t_inner, t_outer);
             py::dict d = result_dict(r.x, r.trace);
             d["best_round"] = r.best_round;
             return d;
           }, py::arg("x0"), py::arg("f_lb") = 0.0, py::arg("eta") = 1.0,
           py::arg("t_inner") = 1000, py::arg("t_outer") = 10)
      .def("gd", [](const Problem& p, const Vector& x0, double eta, std::int64_t max_iters,
                    std::optional<double> tolerance) {
             solvers::GdOptions o;
             o.max_iters = max_iters;
             o.distance_tolerance = tolerance;
             const auto schedule = analytics::gd_constant_schedule(p.inst->truth.norm(), eta);
             const auto r = solvers::gradient_descent(p.objective("squared"), x0, schedule, o);
             return result_dict(r.x, r.trace);
           }, py::arg("x0"), py::arg("eta"), py::arg("max_iters") = 1000,
           py::arg("tolerance") = py::none());

  m.def("shepp_logan", [](std::int64_t n, double radius_factor, double intensity, double scale) {
          return imaging::shepp_logan(n, radius_factor, intensity, scale).to_matrix();
        }, py::arg("n"), py::arg("center_radius_factor") = 2.0, py::arg("center_intensity") = 0.5,
        py::arg("global_scale") = 4.0);
  m.def("tv_norm", [](const Matrix& image) { return tv::tv_norm(tv::ImageVec::from_matrix(image)); });
  m.def("tv_ball_project", [](const Matrix& image, double lambda, double tol, std::int64_t max_sweeps) {
          return tv::tv_ball_project(tv::ImageVec::from_matrix(image), lambda, tol, max_sweeps).to_matrix();
        }, py::arg("image"), py::arg("radius"), py::arg("tol") = 1e-6, py::arg("max_sweeps") = 20000);
  m.def("psnr", [](const Matrix& rec, const Matrix& truth) {
    return imaging::psnr(tv::ImageVec::from_matrix(rec), tv::ImageVec::from_matrix(truth));
  });

  m.def("default_config", [](const std::string& kind, bool full_scale) {
          return experiments::ExperimentConfig::defaults(experiments::parse_kind(kind), full_scale).to_json();
        }, py::arg("kind"), py::arg("full_scale") = false);
  m.def("config_hash", [](const std::string& json) {
    return experiments::ExperimentConfig::from_json(json).hash_hex();
  });
  m.def("run_experiment", [](const std::string& json) {
    const auto cfg = experiments::ExperimentConfig::from_json(json);
    cfg.validate();
    py::gil_scoped_release release;
    experiments::run_and_write(cfg);
  }, py::arg("config_json"));
}
