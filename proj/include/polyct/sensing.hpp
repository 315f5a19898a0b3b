#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>

#include "polyct/types.hpp"

namespace polyct::sensing {

enum class EnsembleKind : std::uint32_t { gaussian = 1, rwht = 2, explicit_matrix = 3 };

const char* to_string(EnsembleKind kind) noexcept;

/// Linear sensing map A in R^{m x d}; row i is the sensing vector a_i.
///
/// Three representations share one interface:
///  - gaussian: dense m x d matrix of i.i.d. N(0,1) entries,
///  - rwht: m = ell * d rows, block j equal to H_d D_j with D_j = diag(xi_j),
///    applied through the fast Walsh-Hadamard transform,
///  - explicit: caller-provided sparse rows (e.g. a discrete Radon transform).
///
/// Ensembles are immutable after construction, so apply/adjoint may be called
/// concurrently.
class SensingEnsemble {
 public:
  struct Gaussian {
    Matrix rows;  // m x d
  };
  struct Rwht {
    Matrix signs;  // d x ell, entries +-1; column j is xi^{(j)}
  };
  struct Explicit {
    SparseRows rows;  // m x d
  };

  static SensingEnsemble from_gaussian(Matrix rows, std::uint64_t seed);
  static SensingEnsemble from_rwht(Matrix signs, std::uint64_t seed);
  static SensingEnsemble from_explicit(SparseRows rows, std::uint64_t seed = 0);
  static SensingEnsemble from_dense_rows(const Matrix& rows);

  EnsembleKind kind() const noexcept;
  std::int64_t dim() const noexcept { return dim_; }
  std::int64_t samples() const noexcept { return samples_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// A x (length m).
  Vector apply(const Vector& x) const;
  /// A^T u (length d).
  Vector adjoint(const Vector& u) const;
  /// A X for a d x k block of signals; a single GEMM for dense ensembles.
  Matrix apply_many(const Matrix& xs) const;
  /// Sensing vector a_i.
  Vector row(std::int64_t i) const;

  /// Materialized m x d matrix (tests, serialization of small ensembles).
  Matrix to_dense() const;

  const Gaussian* gaussian_payload() const { return std::get_if<Gaussian>(&payload_); }
  const Rwht* rwht_payload() const { return std::get_if<Rwht>(&payload_); }
  const Explicit* explicit_payload() const { return std::get_if<Explicit>(&payload_); }

 private:
  SensingEnsemble(std::variant<Gaussian, Rwht, Explicit> payload, std::int64_t dim,
                  std::int64_t samples, std::uint64_t seed);

  std::variant<Gaussian, Rwht, Explicit> payload_;
  std::int64_t dim_;
  std::int64_t samples_;
  std::uint64_t seed_;
};

bool is_power_of_two(std::int64_t n) noexcept;

/// Unnormalized Walsh-Hadamard transform (Sylvester ordering,
/// H_2 = [[1, 1], [1, -1]]). Applying it twice multiplies by the length.
void fwht_in_place(std::span<double> v);

/// m x d standard-normal ensemble; row i is drawn from its own counter stream.
SensingEnsemble gaussian_ensemble(std::int64_t dim, std::int64_t samples, std::uint64_t seed);

/// Randomized Walsh-Hadamard ensemble with oversampling `ell` (m = ell * d).
SensingEnsemble rwht_ensemble(std::int64_t dim, std::int64_t ell, std::uint64_t seed);

/// h_i(x) = 1 - exp(-max(<a_i, x>, 0)), all entries in [0, 1).
Vector forward_model(const SensingEnsemble& ensemble, const Vector& x);

/// Same map applied to precomputed inner products <a_i, x>.
Vector forward_from_products(const Vector& products);

enum class NoiseKind : std::uint32_t { clean = 0, poisson_gaussian = 1 };

struct NoiseModel {
  NoiseKind kind = NoiseKind::clean;
  double detector_scale = 0.0;  // S, photon budget per detector

  static NoiseModel clean() { return {}; }
  static NoiseModel poisson_gaussian(double detector_scale) {
    return {NoiseKind::poisson_gaussian, detector_scale};
  }
};

/// Normalized measurements y consumed by the losses, with provenance.
///
/// Clean measurements lie in [0, 1). Noisy ones are 1 - counts / S with counts
/// from the Gaussian approximation to Poisson photon counting; they are not
/// clipped and may fall outside [0, 1).
struct MeasurementSet {
  Vector y;
  NoiseKind noise = NoiseKind::clean;
  double detector_scale = 0.0;
  std::optional<Vector> truth;
  double truth_norm = 0.0;
};

MeasurementSet generate_measurements(const SensingEnsemble& ensemble, const Vector& x_star,
                                     const NoiseModel& noise, std::uint64_t seed);

/// r * g / ||g|| for a seeded standard-normal g; exactly the zero vector if r == 0.
Vector sample_signal(std::int64_t dim, double norm, std::uint64_t seed);

}  // namespace polyct::sensing
