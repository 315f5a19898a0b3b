#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "polyct/sensing.hpp"
#include "polyct/tv.hpp"

namespace polyct::imaging {

struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double semi_x = 0.0;
  double semi_y = 0.0;
  double rotation = 0.0;  // radians, counterclockwise
  double intensity = 0.0; // additive

  bool contains(double x, double y) const;
};

enum class PhantomTable { original, modified };

/// Ellipse table on [-1, 1]^2 (x to the right, y up). When `override_index`
/// is set, pixels inside that ellipse take the value `override_value` instead
/// of the additive sum.
struct Phantom {
  std::int64_t side = 0;
  std::vector<Ellipse> ellipses;
  std::int64_t override_index = -1;
  double override_value = 0.0;
  double global_scale = 1.0;

  /// Pixel (row, col) is sampled at its center; row 0 is the top.
  tv::ImageVec rasterize() const;
};

std::vector<Ellipse> shepp_logan_table(PhantomTable table = PhantomTable::original);

/// Index of the small central ellipse at (0, 0.1) that the enlarged variants modify.
inline constexpr std::int64_t kCenterEllipse = 5;

Phantom shepp_logan_phantom(std::int64_t n, double center_radius_factor, double center_intensity,
                            double global_scale, PhantomTable table = PhantomTable::original);

/// Rasterized phantom, divided by global_scale and clamped at 0.
tv::ImageVec shepp_logan(std::int64_t n, double center_radius_factor, double center_intensity,
                         double global_scale, PhantomTable table = PhantomTable::original);
/// Same with the table's own intensity for the central ellipse.
tv::ImageVec shepp_logan(std::int64_t n, double center_radius_factor = 1.0,
                         double global_scale = 1.0, PhantomTable table = PhantomTable::original);

/// Pixel intersection lengths of the line {s (cos t, sin t) + u (-sin t, cos t)}
/// with the n x n grid on [-1, 1]^2, as (column-major pixel index, length).
std::vector<std::pair<std::int64_t, double>> trace_ray(std::int64_t n, double theta, double s);

/// Length of the same line inside the square [-1, 1]^2.
double chord_length(double theta, double s);

struct RadonGeometry {
  std::int64_t side = 0;
  std::vector<double> angles;
  std::vector<double> detectors;
};

/// Angles (k + angle_offset) pi / n_angles, k < n_angles; detector offsets at
/// the centers of n_detectors equal cells spanning [-sqrt 2, sqrt 2].
RadonGeometry radon_geometry(std::int64_t n, std::int64_t n_angles, std::int64_t n_detectors,
                             double angle_offset = 0.0);

/// Parallel-beam ray-length matrix, one row per (angle, detector) in angle-major
/// order, packaged as an explicit ensemble. Rays missing the image give empty rows.
sensing::SensingEnsemble radon_ensemble(std::int64_t n, std::int64_t n_angles,
                                        std::int64_t n_detectors, double angle_offset = 0.0);

/// -10 log10((1 / n^2) (||rec - truth||_F / max |truth|)^2); +inf when equal.
double psnr(const tv::ImageVec& reconstruction, const tv::ImageVec& truth);

/// Binary 16-bit PGM; values mapped linearly from [0, vmax] (vmax <= 0 means the image max).
void write_pgm16(const std::string& path, const tv::ImageVec& image, double vmax = 0.0);
/// n lines of n comma-separated values, row by row.
void write_csv(const std::string& path, const tv::ImageVec& image);
std::string phantom_json(const Phantom& phantom);

}  // namespace polyct::imaging
