#include "polyct/sensing.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "polyct/error.hpp"
#include "polyct/rng.hpp"

namespace polyct::sensing {

namespace {

void check_length(std::int64_t got, std::int64_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::dimension_mismatch, std::string(what) + ": expected length " +
                                                   std::to_string(want) + ", got " +
                                                   std::to_string(got));
  }
}

}  // namespace

const char* to_string(EnsembleKind kind) noexcept {
  switch (kind) {
    case EnsembleKind::gaussian: return "gaussian";
    case EnsembleKind::rwht: return "rwht";
    case EnsembleKind::explicit_matrix: return "explicit";
  }
  return "unknown";
}

bool is_power_of_two(std::int64_t n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

void fwht_in_place(std::span<double> v) {
  const auto n = static_cast<std::int64_t>(v.size());
  if (!is_power_of_two(n)) {
    throw Error(ErrorCode::not_power_of_two,
                "Walsh-Hadamard transform length " + std::to_string(n));
  }
  for (std::int64_t half = 1; half < n; half *= 2) {
    for (std::int64_t start = 0; start < n; start += 2 * half) {
      for (std::int64_t i = start; i < start + half; ++i) {
        const double a = v[i];
        const double b = v[i + half];
        v[i] = a + b;
        v[i + half] = a - b;
      }
    }
  }
}

SensingEnsemble::SensingEnsemble(std::variant<Gaussian, Rwht, Explicit> payload,
                                 std::int64_t dim, std::int64_t samples, std::uint64_t seed)
    : payload_(std::move(payload)), dim_(dim), samples_(samples), seed_(seed) {}

SensingEnsemble SensingEnsemble::from_gaussian(Matrix rows, std::uint64_t seed) {
  const auto m = rows.rows();
  const auto d = rows.cols();
  if (m < 1 || d < 1) throw Error(ErrorCode::invalid_argument, "empty gaussian ensemble");
  return SensingEnsemble(Gaussian{std::move(rows)}, d, m, seed);
}

SensingEnsemble SensingEnsemble::from_rwht(Matrix signs, std::uint64_t seed) {
  const auto d = signs.rows();
  const auto ell = signs.cols();
  if (!is_power_of_two(d)) {
    throw Error(ErrorCode::not_power_of_two, "rwht dimension " + std::to_string(d));
  }
  if (ell < 1) throw Error(ErrorCode::invalid_argument, "rwht oversampling must be >= 1");
  for (Eigen::Index k = 0; k < signs.size(); ++k) {
    const double s = signs.data()[k];
    if (s != 1.0 && s != -1.0) throw Error(ErrorCode::invalid_argument, "rwht signs must be +-1");
  }
  return SensingEnsemble(Rwht{std::move(signs)}, d, d * ell, seed);
}

SensingEnsemble SensingEnsemble::from_explicit(SparseRows rows, std::uint64_t seed) {
  const auto m = rows.rows();
  const auto d = rows.cols();
  if (m < 1 || d < 1) throw Error(ErrorCode::invalid_argument, "empty explicit ensemble");
  rows.makeCompressed();
  return SensingEnsemble(Explicit{std::move(rows)}, d, m, seed);
}

SensingEnsemble SensingEnsemble::from_dense_rows(const Matrix& rows) {
  SparseRows sparse = rows.sparseView();
  return from_explicit(std::move(sparse));
}

EnsembleKind SensingEnsemble::kind() const noexcept {
  switch (payload_.index()) {
    case 0: return EnsembleKind::gaussian;
    case 1: return EnsembleKind::rwht;
    default: return EnsembleKind::explicit_matrix;
  }
}

Vector SensingEnsemble::apply(const Vector& x) const {
  check_length(x.size(), dim_, "ensemble apply");
  if (const auto* g = gaussian_payload()) return g->rows * x;
  if (const auto* e = explicit_payload()) return e->rows * x;
  const auto& signs = rwht_payload()->signs;
  Vector out(samples_);
  for (Eigen::Index j = 0; j < signs.cols(); ++j) {
    auto block = out.segment(j * dim_, dim_);
    block = signs.col(j).cwiseProduct(x);
    fwht_in_place(std::span<double>(block.data(), static_cast<std::size_t>(dim_)));
  }
  return out;
}

Vector SensingEnsemble::adjoint(const Vector& u) const {
  check_length(u.size(), samples_, "ensemble adjoint");
  if (const auto* g = gaussian_payload()) return g->rows.transpose() * u;
  if (const auto* e = explicit_payload()) return e->rows.transpose() * u;
  const auto& signs = rwht_payload()->signs;
  Vector out = Vector::Zero(dim_);
  Vector scratch(dim_);
  for (Eigen::Index j = 0; j < signs.cols(); ++j) {
    scratch = u.segment(j * dim_, dim_);
    fwht_in_place(std::span<double>(scratch.data(), static_cast<std::size_t>(dim_)));
    out += signs.col(j).cwiseProduct(scratch);
  }
  return out;
}

Matrix SensingEnsemble::apply_many(const Matrix& xs) const {
  check_length(xs.rows(), dim_, "ensemble apply_many");
  if (const auto* g = gaussian_payload()) return g->rows * xs;
  if (const auto* e = explicit_payload()) return e->rows * xs;
  Matrix out(samples_, xs.cols());
  for (Eigen::Index k = 0; k < xs.cols(); ++k) out.col(k) = apply(xs.col(k));
  return out;
}

Vector SensingEnsemble::row(std::int64_t i) const {
  if (i < 0 || i >= samples_) throw Error(ErrorCode::invalid_argument, "row index out of range");
  if (const auto* g = gaussian_payload()) return g->rows.row(i).transpose();
  if (const auto* e = explicit_payload()) return Vector(e->rows.row(i).transpose());
  Vector unit = Vector::Zero(samples_);
  unit[i] = 1.0;
  return adjoint(unit);
}

Matrix SensingEnsemble::to_dense() const {
  if (const auto* g = gaussian_payload()) return g->rows;
  if (const auto* e = explicit_payload()) return Matrix(e->rows);
  Matrix out(samples_, dim_);
  for (std::int64_t i = 0; i < samples_; ++i) out.row(i) = row(i).transpose();
  return out;
}

SensingEnsemble gaussian_ensemble(std::int64_t dim, std::int64_t samples, std::uint64_t seed) {
  if (dim < 1 || samples < 1) {
    throw Error(ErrorCode::invalid_argument, "gaussian ensemble needs d, m >= 1");
  }
  Matrix rows(samples, dim);
  for (std::int64_t i = 0; i < samples; ++i) {
    CounterRng rng(seed, make_stream(StreamTag::gaussian_row, static_cast<std::uint64_t>(i)));
    for (std::int64_t j = 0; j < dim; ++j) rows(i, j) = rng.normal();
  }
  return SensingEnsemble::from_gaussian(std::move(rows), seed);
}

SensingEnsemble rwht_ensemble(std::int64_t dim, std::int64_t ell, std::uint64_t seed) {
  if (!is_power_of_two(dim)) {
    throw Error(ErrorCode::not_power_of_two, "rwht dimension " + std::to_string(dim));
  }
  if (ell < 1) throw Error(ErrorCode::invalid_argument, "rwht oversampling must be >= 1");
  Matrix signs(dim, ell);
  for (std::int64_t j = 0; j < ell; ++j) {
    CounterRng rng(seed, make_stream(StreamTag::rwht_signs, static_cast<std::uint64_t>(j)));
    for (std::int64_t i = 0; i < dim; ++i) signs(i, j) = rng.sign();
  }
  return SensingEnsemble::from_rwht(std::move(signs), seed);
}

Vector forward_from_products(const Vector& products) {
  // 1 - exp(-t) written as -expm1(-t) keeps small values exact.
  return products.unaryExpr([](double t) { return t > 0.0 ? -std::expm1(-t) : 0.0; });
}

Vector forward_model(const SensingEnsemble& ensemble, const Vector& x) {
  return forward_from_products(ensemble.apply(x));
}

MeasurementSet generate_measurements(const SensingEnsemble& ensemble, const Vector& x_star,
                                     const NoiseModel& noise, std::uint64_t seed) {
  check_length(x_star.size(), ensemble.dim(), "measurement signal");
  if (!x_star.allFinite()) throw Error(ErrorCode::invalid_argument, "signal is not finite");
  MeasurementSet out;
  out.truth = x_star;
  out.truth_norm = x_star.norm();
  out.noise = noise.kind;
  const Vector products = ensemble.apply(x_star);
  if (noise.kind == NoiseKind::clean) {
    out.y = forward_from_products(products);
    return out;
  }
  if (!(noise.detector_scale > 0.0) || !std::isfinite(noise.detector_scale)) {
    throw Error(ErrorCode::invalid_argument, "detector scale S must be positive");
  }
  const double scale = noise.detector_scale;
  out.detector_scale = scale;
  out.y.resize(products.size());
  for (Eigen::Index i = 0; i < products.size(); ++i) {
    CounterRng rng(seed, make_stream(StreamTag::noise, static_cast<std::uint64_t>(i)));
    const double mean = scale * std::exp(-std::max(products[i], 0.0));
    const double counts = mean + std::sqrt(mean) * rng.normal();
    out.y[i] = 1.0 - counts / scale;
  }
  return out;
}

Vector sample_signal(std::int64_t dim, double norm, std::uint64_t seed) {
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "signal dimension must be >= 1");
  if (!(norm >= 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::invalid_argument, "signal norm must be finite and >= 0");
  }
  if (norm == 0.0) return Vector::Zero(dim);
  for (std::uint64_t attempt = 0;; ++attempt) {
    CounterRng rng(seed, make_stream(StreamTag::signal, attempt));
    Vector g(dim);
    for (std::int64_t j = 0; j < dim; ++j) g[j] = rng.normal();
    const double g_norm = g.norm();
    if (g_norm > 0.0) return (norm / g_norm) * g;
  }
}

}  // namespace polyct::sensing
