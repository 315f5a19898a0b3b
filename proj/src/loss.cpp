#include "polyct/loss.hpp"

#include <cmath>
#include <string>

#include "polyct/error.hpp"

namespace polyct::loss {

namespace {

inline double positive_part(double t) { return t > 0.0 ? t : 0.0; }
inline double link(double t) { return t > 0.0 ? -std::expm1(-t) : 0.0; }
inline double sign_with_zero(double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); }

}  // namespace

Objective::Objective(const sensing::SensingEnsemble& ensemble,
                     const sensing::MeasurementSet& measurements, LossKind kind)
    : ensemble_(&ensemble), measurements_(&measurements), kind_(kind) {
  if (measurements.y.size() != ensemble.samples()) {
    throw Error(ErrorCode::dimension_mismatch,
                "measurement count " + std::to_string(measurements.y.size()) +
                    " does not match ensemble rows " + std::to_string(ensemble.samples()));
  }
}

void Objective::check(const Vector& x) const {
  if (x.size() != ensemble_->dim()) {
    throw Error(ErrorCode::dimension_mismatch, "objective point has length " +
                                                   std::to_string(x.size()) + ", expected " +
                                                   std::to_string(ensemble_->dim()));
  }
}

double Objective::value_from_products(const Vector& products) const {
  const Vector& y = measurements_->y;
  const auto m = static_cast<double>(y.size());
  double sum = 0.0;
  if (kind_ == LossKind::l1) {
    for (Eigen::Index i = 0; i < y.size(); ++i) sum += std::abs(y[i] - link(products[i]));
    return sum / m;
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = link(products[i]) - y[i];
    sum += r * r;
  }
  return sum / (2.0 * m);
}

Vector l1_row_weights(const Vector& products, const Vector& y) {
  const auto m = static_cast<double>(y.size());
  Vector w(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double t = products[i];
    if (t < 0.0) {
      w[i] = 0.0;
      continue;
    }
    const double residual = y[i] - link(t);
    w[i] = -sign_with_zero(residual) * std::exp(-positive_part(t)) / m;
  }
  return w;
}

Evaluation Objective::evaluate(const Vector& x) const {
  check(x);
  const Vector products = ensemble_->apply(x);
  const Vector& y = measurements_->y;
  const auto m = static_cast<double>(y.size());
  Evaluation out;
  Vector w(y.size());
  double sum = 0.0;
  if (kind_ == LossKind::l1) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double t = products[i];
      const double residual = y[i] - link(t);
      sum += std::abs(residual);
      w[i] = t < 0.0 ? 0.0 : -sign_with_zero(residual) * std::exp(-positive_part(t)) / m;
    }
    out.value = sum / m;
  } else {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double t = products[i];
      const double residual = link(t) - y[i];
      sum += residual * residual;
      w[i] = t < 0.0 ? 0.0 : residual * std::exp(-positive_part(t)) / m;
    }
    out.value = sum / (2.0 * m);
  }
  out.direction = ensemble_->adjoint(w);
  return out;
}

double Objective::value(const Vector& x) const {
  check(x);
  return value_from_products(ensemble_->apply(x));
}

Vector Objective::direction(const Vector& x) const { return evaluate(x).direction; }

namespace {

void require_kind(const Objective& obj, LossKind kind) {
  if (obj.kind() != kind) {
    throw Error(ErrorCode::invalid_argument, "objective has the wrong loss kind");
  }
}

}  // namespace

double l1_value(const Objective& obj, const Vector& x) {
  require_kind(obj, LossKind::l1);
  return obj.value(x);
}

Vector l1_subgradient(const Objective& obj, const Vector& x) {
  require_kind(obj, LossKind::l1);
  return obj.direction(x);
}

double sq_value(const Objective& obj, const Vector& x) {
  require_kind(obj, LossKind::squared);
  return obj.value(x);
}

Vector sq_gradient(const Objective& obj, const Vector& x) {
  require_kind(obj, LossKind::squared);
  return obj.direction(x);
}

}  // namespace polyct::loss
