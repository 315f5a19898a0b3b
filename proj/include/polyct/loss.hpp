#pragma once

#include "polyct/sensing.hpp"
#include "polyct/types.hpp"

namespace polyct::loss {

enum class LossKind { l1, squared };

/// Value together with the (sub)gradient selection at the same point.
struct Evaluation {
  double value = 0.0;
  Vector direction;
};

/// Recovery objective over a fixed ensemble and measurement set.
///
///   l1:       f(x) = (1/m) sum_i |y_i - h_i(x)|
///   squared:  L(x) = (1/2m) sum_i (h_i(x) - y_i)^2
///
/// with h_i(x) = 1 - exp(-<a_i, x>_+). The l1 subgradient is the Clarke
/// selection with sign(0) = 0 and the kink indicator 1{<a_i, x> >= 0} equal to
/// 1 at exact zero; the squared-loss gradient uses the same indicator. Ties are
/// only exact floating-point zeros.
///
/// The objective holds non-owning references; both referents must outlive it.
class Objective {
 public:
  Objective(const sensing::SensingEnsemble& ensemble,
            const sensing::MeasurementSet& measurements, LossKind kind);

  LossKind kind() const noexcept { return kind_; }
  const sensing::SensingEnsemble& ensemble() const noexcept { return *ensemble_; }
  const sensing::MeasurementSet& measurements() const noexcept { return *measurements_; }
  std::int64_t dim() const noexcept { return ensemble_->dim(); }

  double value(const Vector& x) const;
  Vector direction(const Vector& x) const;
  /// One forward and one adjoint pass shared between value and direction.
  Evaluation evaluate(const Vector& x) const;

  /// Value from precomputed inner products A x.
  double value_from_products(const Vector& products) const;

 private:
  void check(const Vector& x) const;

  const sensing::SensingEnsemble* ensemble_;
  const sensing::MeasurementSet* measurements_;
  LossKind kind_;
};

double l1_value(const Objective& obj, const Vector& x);
Vector l1_subgradient(const Objective& obj, const Vector& x);
double sq_value(const Objective& obj, const Vector& x);
Vector sq_gradient(const Objective& obj, const Vector& x);

/// Per-row weights w with l1 subgradient = A^T w, from inner products A x.
/// Exposed for batched evaluations (many points against one ensemble).
Vector l1_row_weights(const Vector& products, const Vector& y);

}  // namespace polyct::loss
