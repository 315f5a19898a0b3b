#include "polyct/tv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "polyct/error.hpp"

namespace polyct::tv {

namespace {

void check_side(std::int64_t side) {
  if (side < 1) throw Error(ErrorCode::invalid_argument, "image side must be >= 1");
}

void check_same(const ImageVec& x, const GradField& z) {
  if (x.side != z.side) {
    throw Error(ErrorCode::dimension_mismatch, "image side " + std::to_string(x.side) +
                                                   " does not match field side " +
                                                   std::to_string(z.side));
  }
}

Eigen::Map<const Matrix> as_matrix(const ImageVec& x) {
  return Eigen::Map<const Matrix>(x.data.data(), x.side, x.side);
}

// (I + J^T J) x, matrix-free.
Vector normal_apply(const Vector& x, std::int64_t side) {
  const ImageVec img(x, side);
  return x + jtv_adjoint(jtv_apply(img)).data;
}

}  // namespace

ImageVec::ImageVec(Vector d, std::int64_t s) : data(std::move(d)), side(s) {
  check_side(side);
  if (data.size() != side * side) {
    throw Error(ErrorCode::dimension_mismatch,
                "image data has length " + std::to_string(data.size()) + ", expected " +
                    std::to_string(side * side));
  }
}

ImageVec ImageVec::from_matrix(const Matrix& image) {
  if (image.rows() != image.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "image must be square");
  }
  return ImageVec(Eigen::Map<const Vector>(image.data(), image.size()), image.rows());
}

ImageVec ImageVec::zeros(std::int64_t side) {
  check_side(side);
  return ImageVec(Vector::Zero(side * side), side);
}

Matrix ImageVec::to_matrix() const { return as_matrix(*this); }

GradField::GradField(Vector d, std::int64_t s) : data(std::move(d)), side(s) {
  check_side(side);
  if (data.size() != 2 * side * side) {
    throw Error(ErrorCode::dimension_mismatch,
                "gradient field has length " + std::to_string(data.size()) + ", expected " +
                    std::to_string(2 * side * side));
  }
}

GradField GradField::zeros(std::int64_t side) {
  check_side(side);
  return GradField(Vector::Zero(2 * side * side), side);
}

namespace {

// z = J x for column-major x (X(i, j) = x[j*n + i]); writes all 2 n^2 slots.
void apply_j(const double* x, double* z, std::int64_t n) {
  const std::int64_t nn = n * n;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      const double here = x[j * n + i];
      z[i * n + j] = i + 1 < n ? x[j * n + i + 1] - here : 0.0;
      z[nn + i * n + j] = j + 1 < n ? x[(j + 1) * n + i] - here : 0.0;
    }
  }
}

// x += J^T z.
void add_jt(const double* z, double* x, std::int64_t n) {
  const std::int64_t nn = n * n;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      if (i + 1 < n) {
        const double v = z[i * n + j];
        x[j * n + i + 1] += v;
        x[j * n + i] -= v;
      }
      if (j + 1 < n) {
        const double h = z[nn + i * n + j];
        x[(j + 1) * n + i] += h;
        x[j * n + i] -= h;
      }
    }
  }
}

}  // namespace

GradField jtv_apply(const ImageVec& image) {
  GradField out = GradField::zeros(image.side);
  apply_j(image.data.data(), out.data.data(), image.side);
  return out;
}

ImageVec jtv_adjoint(const GradField& field) {
  ImageVec out = ImageVec::zeros(field.side);
  add_jt(field.data.data(), out.data.data(), field.side);
  return out;
}

double group_norm(const GradField& field) {
  const std::int64_t nn = field.pairs();
  const double* z = field.data.data();
  double sum = 0.0;
  for (std::int64_t i = 0; i < nn; ++i) sum += std::hypot(z[i], z[nn + i]);
  return sum;
}

double tv_norm(const ImageVec& image) { return group_norm(jtv_apply(image)); }

GradField group_prox(const GradField& field, double mu) {
  if (!(mu >= 0.0)) throw Error(ErrorCode::invalid_argument, "shrinkage level must be >= 0");
  GradField out = field;
  const std::int64_t nn = field.pairs();
  double* z = out.data.data();
  for (std::int64_t i = 0; i < nn; ++i) {
    const double r = std::hypot(z[i], z[nn + i]);
    const double s = r > mu ? 1.0 - mu / r : 0.0;
    z[i] *= s;
    z[nn + i] *= s;
  }
  return out;
}

namespace {

// Root of sum_i [r_i - mu]_+ = lambda for sum_i r_i > lambda. Candidates are
// pruned with the lower bound mu >= (sum over kept - lambda) / #kept (pairs at or
// below it are inactive at the root); the survivors are sorted and scanned.
double ball_threshold(const std::vector<double>& r, double total, double lambda) {
  std::vector<double> kept;
  kept.reserve(r.size());
  double bound = (total - lambda) / static_cast<double>(r.size());
  const std::vector<double>* source = &r;
  for (int pass = 0; pass < 8; ++pass) {
    std::vector<double> next;
    next.reserve(source->size());
    double sum = 0.0;
    for (double v : *source) {
      if (v > bound) {
        next.push_back(v);
        sum += v;
      }
    }
    const bool stable = next.size() == source->size();
    kept = std::move(next);
    source = &kept;
    if (stable || kept.empty()) break;
    bound = (sum - lambda) / static_cast<double>(kept.size());
  }
  std::sort(kept.begin(), kept.end(), std::greater<>());
  double cumulative = 0.0;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    cumulative += kept[k];
    const double mu = (cumulative - lambda) / static_cast<double>(k + 1);
    const double next = k + 1 < kept.size() ? kept[k + 1] : 0.0;
    if (next <= mu) return std::max(mu, 0.0);
  }
  return std::max(bound, 0.0);
}

double ball_excess(const std::vector<double>& r, double mu) {
  double s = 0.0;
  for (double v : r) s += v > mu ? v - mu : 0.0;
  return s;
}

// Projects the field held in z (length 2 nn) onto the group-norm ball in place.
// Returns mu_star, or 0 when z was already inside.
double ball_project_in_place(double* z, std::int64_t nn, double lambda, std::vector<double>& r) {
  r.resize(static_cast<std::size_t>(nn));
  double total = 0.0;
  for (std::int64_t i = 0; i < nn; ++i) {
    const double v = std::sqrt(z[i] * z[i] + z[nn + i] * z[nn + i]);
    r[static_cast<std::size_t>(i)] = v;
    total += v;
  }
  if (total <= lambda) return 0.0;
  double mu_star = ball_threshold(r, total, lambda);
  if (std::abs(ball_excess(r, mu_star) - lambda) > 1e-10 * lambda) {
    double lo = 0.0;
    double hi = *std::max_element(r.begin(), r.end());
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (ball_excess(r, mid) > lambda ? lo : hi) = mid;
    }
    mu_star = 0.5 * (lo + hi);
  }
  for (std::int64_t i = 0; i < nn; ++i) {
    const double v = r[static_cast<std::size_t>(i)];
    const double s = v > mu_star ? 1.0 - mu_star / v : 0.0;
    z[i] *= s;
    z[nn + i] *= s;
  }
  return mu_star;
}

}  // namespace

BallProjection group_ball_project_detailed(const GradField& field, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::invalid_argument, "ball radius must be > 0");
  BallProjection out{field, 0.0, false};
  std::vector<double> scratch;
  out.threshold = ball_project_in_place(out.field.data.data(), field.pairs(), lambda, scratch);
  out.inside = out.threshold == 0.0 && group_norm(field) <= lambda;
  return out;
}

GradField group_ball_project(const GradField& field, double lambda) {
  return group_ball_project_detailed(field, lambda).field;
}

GraphPair graph_project(const ImageVec& x, const GradField& z, double solver_tol,
                        std::int64_t max_iterations) {
  check_same(x, z);
  if (!(solver_tol > 0.0)) throw Error(ErrorCode::invalid_argument, "solver tolerance must be > 0");
  const std::int64_t n = x.side;
  if (max_iterations <= 0) max_iterations = std::max<std::int64_t>(10 * n * n, 100);

  const Vector rhs = x.data + jtv_adjoint(z).data;
  const double rhs_norm = rhs.norm();
  Vector sol = x.data;
  Vector res = rhs - normal_apply(sol, n);
  Vector dir = res;
  double rr = res.squaredNorm();
  std::int64_t it = 0;
  const double target = solver_tol * rhs_norm;
  while (std::sqrt(rr) > target) {
    if (it >= max_iterations) {
      throw Error(ErrorCode::nonconvergence,
                  "graph projection solve stopped at relative residual " +
                      std::to_string(std::sqrt(rr) / rhs_norm) + " after " + std::to_string(it) +
                      " iterations",
                  it);
    }
    const Vector q = normal_apply(dir, n);
    const double alpha = rr / dir.dot(q);
    sol.noalias() += alpha * dir;
    res.noalias() -= alpha * q;
    const double rr_next = res.squaredNorm();
    dir = res + (rr_next / rr) * dir;
    rr = rr_next;
    ++it;
  }
  ImageVec out_x(std::move(sol), n);
  GradField out_z = jtv_apply(out_x);
  return {std::move(out_x), std::move(out_z), it};
}

GraphProjector::GraphProjector(std::int64_t side) : side_(side) {
  check_side(side);
  const auto n = static_cast<double>(side);
  basis_.resize(side, side);
  Vector eig(side);
  for (std::int64_t k = 0; k < side; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::int64_t i = 0; i < side; ++i) {
      basis_(i, k) = scale * std::cos(std::numbers::pi * static_cast<double>(k) *
                                      (static_cast<double>(i) + 0.5) / n);
    }
    eig[k] = 2.0 - 2.0 * std::cos(std::numbers::pi * static_cast<double>(k) / n);
  }
  inv_scale_.resize(side, side);
  for (std::int64_t i = 0; i < side; ++i) {
    for (std::int64_t j = 0; j < side; ++j) inv_scale_(i, j) = 1.0 / (1.0 + eig[i] + eig[j]);
  }
}

void GraphProjector::solve_into(const double* rhs, double* out) const {
  const Eigen::Map<const Matrix> R(rhs, side_, side_);
  Matrix spectral = basis_.transpose() * R * basis_;
  spectral.array() *= inv_scale_.array();
  Eigen::Map<Matrix> X(out, side_, side_);
  X.noalias() = basis_ * spectral.lazyProduct(basis_.transpose());
}

ImageVec GraphProjector::solve(const Vector& rhs) const {
  if (rhs.size() != side_ * side_) {
    throw Error(ErrorCode::dimension_mismatch, "graph solve right-hand side has wrong length");
  }
  ImageVec out = ImageVec::zeros(side_);
  solve_into(rhs.data(), out.data.data());
  return out;
}

GraphPair GraphProjector::project(const ImageVec& x, const GradField& z) const {
  check_same(x, z);
  if (x.side != side_) throw Error(ErrorCode::dimension_mismatch, "projector built for another side");
  Vector rhs = x.data;
  add_jt(z.data.data(), rhs.data(), side_);
  ImageVec out_x = ImageVec::zeros(side_);
  solve_into(rhs.data(), out_x.data.data());
  GradField out_z = jtv_apply(out_x);
  return {std::move(out_x), std::move(out_z), 0};
}

TvProjection tv_ball_project(const ImageVec& y, double lambda, const DrOptions& options,
                             const DrState* warm, const GraphProjector* projector) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::invalid_argument, "TV radius must be > 0");
  if (!(options.tol > 0.0) || options.max_sweeps < 1 || !(options.step > 0.0)) {
    throw Error(ErrorCode::invalid_argument,
                "DR tolerance and step must be > 0 and max_sweeps >= 1");
  }
  const std::int64_t n = y.side;
  const std::int64_t nn = n * n;
  TvProjection out;
  DrState& s = out.state;
  GradField jy = jtv_apply(y);
  if (group_norm(jy) <= lambda) {
    out.image = y;
    s = {y, jy, y, jy, 0, 0.0};
    out.already_feasible = true;
    return out;
  }

  std::optional<GraphProjector> local;
  if (options.solver == GraphSolver::cosine_transform && projector == nullptr) {
    local.emplace(n);
    projector = &*local;
  }
  if (projector != nullptr && projector->side() != n) {
    throw Error(ErrorCode::dimension_mismatch, "projector built for another side");
  }

  // With gamma the prox step, a fixed point has x = y - J^T w / gamma,
  // x_bar = x - J^T w and z_bar = J x + w for the dual w = z_bar - z, so the
  // previous dual gives a consistent start for a nearby y.
  if (warm != nullptr && warm->z.side == n && warm->z_bar.side == n) {
    const Vector w = warm->z_bar.data - warm->z.data;
    Vector jw = Vector::Zero(nn);
    add_jt(w.data(), jw.data(), n);
    const Vector x0 = y.data - jw / options.step;
    s.x_bar = ImageVec(x0 - jw, n);
    s.z_bar = GradField(Vector(2 * nn), n);
    apply_j(x0.data(), s.z_bar.data.data(), n);
    s.z_bar.data += w;
  } else {
    s.x_bar = y;
    s.z_bar = std::move(jy);
  }
  s.x = ImageVec::zeros(n);
  s.z = GradField::zeros(n);
  double* xb = s.x_bar.data.data();
  double* zb = s.z_bar.data.data();
  double* x = s.x.data.data();
  double* z = s.z.data.data();
  const double* yv = y.data.data();
  Vector rhs(nn);
  Vector gx(nn);
  Vector gz(2 * nn);
  Vector rz(2 * nn);
  std::vector<double> scratch;
  out.converged = false;
  const double gamma = options.step;
  const double shrink = 1.0 / (1.0 + gamma);
  for (std::int64_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    for (std::int64_t k = 0; k < nn; ++k) x[k] = shrink * (xb[k] + gamma * yv[k]);
    std::copy(zb, zb + 2 * nn, z);
    ball_project_in_place(z, nn, lambda, scratch);
    for (std::int64_t k = 0; k < nn; ++k) rhs[k] = 2.0 * x[k] - xb[k];
    for (std::int64_t k = 0; k < 2 * nn; ++k) rz[k] = 2.0 * z[k] - zb[k];
    if (options.solver == GraphSolver::cosine_transform) {
      add_jt(rz.data(), rhs.data(), n);
      projector->solve_into(rhs.data(), gx.data());
      apply_j(gx.data(), gz.data(), n);
    } else {
      GraphPair g = graph_project(ImageVec(rhs, n), GradField(rz, n), options.cg_tol);
      gx = std::move(g.x.data);
      gz = std::move(g.z.data);
    }
    double dx2 = 0.0;
    double dz2 = 0.0;
    for (std::int64_t k = 0; k < nn; ++k) {
      const double d = gx[k] - x[k];
      xb[k] += d;
      dx2 += d * d;
    }
    for (std::int64_t k = 0; k < 2 * nn; ++k) {
      const double d = gz[k] - z[k];
      zb[k] += d;
      dz2 += d * d;
    }
    s.iteration = sweep;
    s.residual = std::sqrt(std::max(dx2, dz2));
    if (!std::isfinite(s.residual)) {
      throw Error(ErrorCode::numerical_failure, "TV projection diverged", sweep);
    }
    if (s.residual <= options.tol) {
      out.converged = true;
      break;
    }
  }
  out.sweeps = s.iteration;
  // Prox of the data term at the final auxiliary point.
  for (std::int64_t k = 0; k < nn; ++k) x[k] = shrink * (xb[k] + gamma * yv[k]);
  std::copy(zb, zb + 2 * nn, z);
  ball_project_in_place(z, nn, lambda, scratch);
  if (!out.converged && options.throw_on_nonconvergence) {
    throw Error(ErrorCode::nonconvergence,
                "TV projection did not converge in " + std::to_string(options.max_sweeps) +
                    " sweeps; final residual " + std::to_string(s.residual),
                s.iteration);
  }

  out.image = s.x;
  const double tv = tv_norm(out.image);
  if (tv > lambda) {
    const double mean = out.image.data.mean();
    out.image.data = mean + (lambda / tv) * (out.image.data.array() - mean);
  }
  return out;
}

ImageVec tv_ball_project(const ImageVec& y, double lambda, double tol, std::int64_t max_sweeps) {
  DrOptions options;
  options.tol = tol;
  options.max_sweeps = max_sweeps;
  return tv_ball_project(y, lambda, options).image;
}

TvBallProjector::TvBallProjector(std::int64_t side, double lambda, DrOptions options,
                                 bool warm_start)
    : graph_(side), lambda_(lambda), options_(options), warm_start_(warm_start) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::invalid_argument, "TV radius must be > 0");
  options_.solver = GraphSolver::cosine_transform;
}

TvProjection TvBallProjector::project(const ImageVec& y) {
  const DrState* warm = warm_start_ && last_ ? &*last_ : nullptr;
  TvProjection p = tv_ball_project(y, lambda_, options_, warm, &graph_);
  ++calls_;
  total_sweeps_ += p.sweeps;
  if (!p.converged) ++unconverged_;
  worst_residual_ = std::max(worst_residual_, p.state.residual);
  if (!p.already_feasible) last_ = std::move(p.state);
  return p;
}

void TvBallProjector::operator()(Vector& x) {
  ImageVec img(std::move(x), graph_.side());
  x = std::move(project(img).image.data);
}

}  // namespace polyct::tv
