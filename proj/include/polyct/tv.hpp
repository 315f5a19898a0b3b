#pragma once

#include <cstdint>
#include <optional>

#include "polyct/types.hpp"

namespace polyct::tv {

/// Square image stored as a vector of length n^2; mat() reads it column by
/// column, so column j of the image is data[j*n .. j*n + n).
struct ImageVec {
  Vector data;
  std::int64_t side = 0;

  ImageVec() = default;
  ImageVec(Vector data, std::int64_t side);

  static ImageVec from_matrix(const Matrix& image);
  static ImageVec zeros(std::int64_t side);
  Matrix to_matrix() const;
  double at(std::int64_t row, std::int64_t col) const { return data[col * side + row]; }
};

/// Discrete gradient field of an n x n image, length 2 n^2. Slot i*n + j holds
/// the vertical difference X(i+1, j) - X(i, j); slot n^2 + i*n + j the
/// horizontal difference X(i, j+1) - X(i, j). Differences that would leave the
/// image (last row / last column) are zero.
struct GradField {
  Vector data;
  std::int64_t side = 0;

  GradField() = default;
  GradField(Vector data, std::int64_t side);

  static GradField zeros(std::int64_t side);
  std::int64_t pairs() const { return side * side; }
};

GradField jtv_apply(const ImageVec& image);
ImageVec jtv_adjoint(const GradField& field);

/// Sum over pixels of the Euclidean length of the gradient pair.
double tv_norm(const ImageVec& image);
/// sum_i ||(z_i, z_{n^2 + i})||.
double group_norm(const GradField& field);

/// Row-wise shrinkage: each pair scaled by 1 - mu / max(||pair||, mu).
GradField group_prox(const GradField& field, double mu);

struct BallProjection {
  GradField field;
  double threshold = 0.0;  // mu_star; 0 when the input was already inside
  bool inside = false;
};

/// Projection onto {z : group_norm(z) <= lambda}: identity inside the ball,
/// otherwise group_prox at the root mu_star of sum_i [||pair_i|| - mu]_+ = lambda
/// (sort and scan, bisection fallback).
BallProjection group_ball_project_detailed(const GradField& field, double lambda);
GradField group_ball_project(const GradField& field, double lambda);

struct GraphPair {
  ImageVec x;
  GradField z;
  std::int64_t solver_iterations = 0;
};

/// (x, z) -> ((I + J^T J)^{-1} (x + J^T z), J x) by matrix-free conjugate
/// gradients to relative residual `solver_tol`.
GraphPair graph_project(const ImageVec& x, const GradField& z, double solver_tol,
                        std::int64_t max_iterations = 0);

/// Cached exact solver for the graph projection. With zero-padded differences
/// J^T J = L (x) I + I (x) L for the 1D Neumann Laplacian L, which the
/// orthonormal DCT-II basis diagonalizes, so a solve costs four n x n products.
class GraphProjector {
 public:
  explicit GraphProjector(std::int64_t side);

  std::int64_t side() const noexcept { return side_; }
  ImageVec solve(const Vector& rhs) const;  // (I + J^T J)^{-1} rhs
  void solve_into(const double* rhs, double* out) const;  // n^2 buffers, column-major
  GraphPair project(const ImageVec& x, const GradField& z) const;

 private:
  std::int64_t side_;
  Matrix basis_;       // n x n, column k is the k-th cosine mode
  Matrix inv_scale_;   // 1 / (1 + lambda_i + lambda_j)
};

enum class GraphSolver { cosine_transform, conjugate_gradient };

struct DrOptions {
  double tol = 1e-8;                // on max(||dx_bar||, ||dz_bar||)
  std::int64_t max_sweeps = 5000;
  GraphSolver solver = GraphSolver::cosine_transform;
  double cg_tol = 1e-10;
  bool throw_on_nonconvergence = true;
  // Prox step gamma: the data-term prox becomes (x_bar + gamma y) / (1 + gamma).
  double step = 1.0;
};

/// Douglas-Rachford iterates for the TV-ball projection.
struct DrState {
  ImageVec x;       // prox of the data term
  GradField z;      // ball-projected gradient
  ImageVec x_bar;   // auxiliary sequence
  GradField z_bar;
  std::int64_t iteration = 0;
  double residual = 0.0;
};

struct TvProjection {
  ImageVec image;
  DrState state;
  bool converged = true;
  bool already_feasible = false;
  std::int64_t sweeps = 0;
};

/// Euclidean projection of y onto {x : tv_norm(x) <= lambda} by Douglas-Rachford
/// splitting of (1/2)||x - y||^2 + indicator(group_norm(z) <= lambda) against
/// the graph of J. Starts from (y, J y) unless `warm` is given. The returned
/// image satisfies tv_norm <= lambda: a residual excess after the last sweep is
/// removed by shrinking the image about its mean, which scales TV linearly.
TvProjection tv_ball_project(const ImageVec& y, double lambda, const DrOptions& options = {},
                             const DrState* warm = nullptr,
                             const GraphProjector* projector = nullptr);

ImageVec tv_ball_project(const ImageVec& y, double lambda, double tol, std::int64_t max_sweeps);

/// Stateful projector for repeated projections onto one TV ball: caches the
/// graph solver and warm-starts each projection from the previous DR state.
class TvBallProjector {
 public:
  TvBallProjector(std::int64_t side, double lambda, DrOptions options = {},
                  bool warm_start = true);

  TvProjection project(const ImageVec& y);
  /// In-place form usable as a solver projection hook.
  void operator()(Vector& x);

  double lambda() const noexcept { return lambda_; }
  std::int64_t calls() const noexcept { return calls_; }
  std::int64_t total_sweeps() const noexcept { return total_sweeps_; }
  std::int64_t unconverged() const noexcept { return unconverged_; }
  double worst_residual() const noexcept { return worst_residual_; }

 private:
  GraphProjector graph_;
  double lambda_;
  DrOptions options_;
  bool warm_start_;
  std::optional<DrState> last_;
  std::int64_t calls_ = 0;
  std::int64_t total_sweeps_ = 0;
  std::int64_t unconverged_ = 0;
  double worst_residual_ = 0.0;
};

}  // namespace polyct::tv
