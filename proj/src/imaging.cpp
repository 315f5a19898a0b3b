#include "polyct/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "polyct/error.hpp"

namespace polyct::imaging {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Parameter interval of the line inside [-1, 1]^2, empty when lo >= hi.
std::pair<double, double> clip_to_square(double px, double py, double dx, double dy) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  auto clip = [&](double p, double d) {
    if (d == 0.0) {
      if (p < -1.0 || p > 1.0) lo = hi = 0.0;
      return;
    }
    double a = (-1.0 - p) / d;
    double b = (1.0 - p) / d;
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
  };
  clip(px, dx);
  clip(py, dy);
  return {lo, hi};
}

std::ofstream open_or_throw(const std::string& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path);
  return out;
}

}  // namespace

bool Ellipse::contains(double x, double y) const {
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  const double u = (x - cx) * c + (y - cy) * s;
  const double v = -(x - cx) * s + (y - cy) * c;
  return (u * u) / (semi_x * semi_x) + (v * v) / (semi_y * semi_y) <= 1.0;
}

std::vector<Ellipse> shepp_logan_table(PhantomTable table) {
  std::vector<Ellipse> e = {
      {0.0, 0.0, 0.69, 0.92, 0.0, 2.0},
      {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98},
      {0.22, 0.0, 0.11, 0.31, -18.0 * kDeg, -0.02},
      {-0.22, 0.0, 0.16, 0.41, 18.0 * kDeg, -0.02},
      {0.0, 0.35, 0.21, 0.25, 0.0, 0.01},
      {0.0, 0.1, 0.046, 0.046, 0.0, 0.01},
      {0.0, -0.1, 0.046, 0.046, 0.0, 0.01},
      {-0.08, -0.605, 0.046, 0.023, 0.0, 0.01},
      {0.0, -0.606, 0.023, 0.023, 0.0, 0.01},
      {0.06, -0.605, 0.023, 0.046, 0.0, 0.01},
  };
  if (table == PhantomTable::modified) {
    const double contrast[] = {1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
    for (std::size_t k = 0; k < e.size(); ++k) e[k].intensity = contrast[k];
  }
  return e;
}

tv::ImageVec Phantom::rasterize() const {
  if (side < 1) throw Error(ErrorCode::invalid_argument, "phantom side must be >= 1");
  if (!(global_scale > 0.0)) throw Error(ErrorCode::invalid_argument, "global scale must be > 0");
  const double h = 2.0 / static_cast<double>(side);
  Matrix img(side, side);
  for (std::int64_t col = 0; col < side; ++col) {
    const double x = -1.0 + (static_cast<double>(col) + 0.5) * h;
    for (std::int64_t row = 0; row < side; ++row) {
      const double y = 1.0 - (static_cast<double>(row) + 0.5) * h;
      double value = 0.0;
      for (const Ellipse& e : ellipses) {
        if (e.contains(x, y)) value += e.intensity;
      }
      if (override_index >= 0 &&
          ellipses[static_cast<std::size_t>(override_index)].contains(x, y)) {
        value = override_value;
      }
      img(row, col) = std::max(value / global_scale, 0.0);
    }
  }
  return tv::ImageVec::from_matrix(img);
}

Phantom shepp_logan_phantom(std::int64_t n, double center_radius_factor, double center_intensity,
                            double global_scale, PhantomTable table) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "phantom side must be >= 1");
  if (!(center_radius_factor > 0.0) || !(global_scale > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "phantom factors must be positive");
  }
  Phantom p;
  p.side = n;
  p.ellipses = shepp_logan_table(table);
  Ellipse& center = p.ellipses[kCenterEllipse];
  center.semi_x *= center_radius_factor;
  center.semi_y *= center_radius_factor;
  p.override_index = kCenterEllipse;
  p.override_value = center_intensity;
  p.global_scale = global_scale;
  return p;
}

tv::ImageVec shepp_logan(std::int64_t n, double center_radius_factor, double center_intensity,
                         double global_scale, PhantomTable table) {
  return shepp_logan_phantom(n, center_radius_factor, center_intensity, global_scale, table)
      .rasterize();
}

tv::ImageVec shepp_logan(std::int64_t n, double center_radius_factor, double global_scale,
                         PhantomTable table) {
  Phantom p = shepp_logan_phantom(n, center_radius_factor, 0.0, global_scale, table);
  p.override_index = -1;
  return p.rasterize();
}

std::vector<std::pair<std::int64_t, double>> trace_ray(std::int64_t n, double theta, double s) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "grid side must be >= 1");
  const double px = s * std::cos(theta);
  const double py = s * std::sin(theta);
  const double dx = -std::sin(theta);
  const double dy = std::cos(theta);
  const auto [lo, hi] = clip_to_square(px, py, dx, dy);
  std::vector<std::pair<std::int64_t, double>> out;
  if (!(hi > lo)) return out;

  const double h = 2.0 / static_cast<double>(n);
  std::vector<double> cuts{lo, hi};
  for (std::int64_t k = 1; k < n; ++k) {
    const double plane = -1.0 + static_cast<double>(k) * h;
    if (dx != 0.0) {
      const double u = (plane - px) / dx;
      if (u > lo && u < hi) cuts.push_back(u);
    }
    if (dy != 0.0) {
      const double u = (plane - py) / dy;
      if (u > lo && u < hi) cuts.push_back(u);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double len = cuts[k + 1] - cuts[k];
    if (len <= 0.0) continue;
    const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
    const double x = px + mid * dx;
    const double y = py + mid * dy;
    const auto col = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((x + 1.0) / h)), 0, n - 1);
    const auto row = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((1.0 - y) / h)), 0, n - 1);
    const std::int64_t index = col * n + row;
    if (!out.empty() && out.back().first == index) {
      out.back().second += len;
    } else {
      out.emplace_back(index, len);
    }
  }
  return out;
}

double chord_length(double theta, double s) {
  const auto [lo, hi] = clip_to_square(s * std::cos(theta), s * std::sin(theta), -std::sin(theta),
                                       std::cos(theta));
  return hi > lo ? hi - lo : 0.0;
}

RadonGeometry radon_geometry(std::int64_t n, std::int64_t n_angles, std::int64_t n_detectors,
                             double angle_offset) {
  if (n < 1 || n_angles < 1 || n_detectors < 1) {
    throw Error(ErrorCode::invalid_argument, "Radon sizes must be >= 1");
  }
  RadonGeometry g;
  g.side = n;
  for (std::int64_t k = 0; k < n_angles; ++k) {
    g.angles.push_back((static_cast<double>(k) + angle_offset) * std::numbers::pi /
                       static_cast<double>(n_angles));
  }
  const double span = 2.0 * std::numbers::sqrt2;
  for (std::int64_t k = 0; k < n_detectors; ++k) {
    g.detectors.push_back(-std::numbers::sqrt2 +
                          (static_cast<double>(k) + 0.5) * span / static_cast<double>(n_detectors));
  }
  return g;
}

sensing::SensingEnsemble radon_ensemble(std::int64_t n, std::int64_t n_angles,
                                        std::int64_t n_detectors, double angle_offset) {
  const RadonGeometry g = radon_geometry(n, n_angles, n_detectors, angle_offset);
  const std::int64_t rows = n_angles * n_detectors;
  std::vector<Eigen::Triplet<double, std::int64_t>> triplets;
  triplets.reserve(static_cast<std::size_t>(rows * 2 * n));
  std::int64_t r = 0;
  for (double theta : g.angles) {
    for (double s : g.detectors) {
      for (const auto& [col, len] : trace_ray(n, theta, s)) triplets.emplace_back(r, col, len);
      ++r;
    }
  }
  SparseRows a(rows, n * n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  return sensing::SensingEnsemble::from_explicit(std::move(a));
}

double psnr(const tv::ImageVec& reconstruction, const tv::ImageVec& truth) {
  if (reconstruction.side != truth.side) {
    throw Error(ErrorCode::dimension_mismatch, "PSNR images differ in size");
  }
  const double peak = truth.data.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw Error(ErrorCode::invalid_argument, "PSNR needs a nonzero truth image");
  const double err = (reconstruction.data - truth.data).norm();
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  const double ratio = err / peak;
  return -10.0 * std::log10(ratio * ratio / static_cast<double>(truth.data.size()));
}

void write_pgm16(const std::string& path, const tv::ImageVec& image, double vmax) {
  if (vmax <= 0.0) vmax = image.data.maxCoeff();
  if (!(vmax > 0.0)) vmax = 1.0;
  auto out = open_or_throw(path, std::ios::binary);
  out << "P5\n" << image.side << ' ' << image.side << "\n65535\n";
  const Matrix m = image.to_matrix();
  for (std::int64_t row = 0; row < image.side; ++row) {
    for (std::int64_t col = 0; col < image.side; ++col) {
      const double v = std::clamp(m(row, col) / vmax, 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
      out.write(bytes, 2);
    }
  }
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path);
}

void write_csv(const std::string& path, const tv::ImageVec& image) {
  auto out = open_or_throw(path, std::ios::out);
  out.precision(17);
  const Matrix m = image.to_matrix();
  for (std::int64_t row = 0; row < image.side; ++row) {
    for (std::int64_t col = 0; col < image.side; ++col) {
      if (col > 0) out << ',';
      out << m(row, col);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path);
}

std::string phantom_json(const Phantom& phantom) {
  nlohmann::json j;
  j["side"] = phantom.side;
  j["global_scale"] = phantom.global_scale;
  j["override_index"] = phantom.override_index;
  j["override_value"] = phantom.override_value;
  auto& list = j["ellipses"] = nlohmann::json::array();
  for (const Ellipse& e : phantom.ellipses) {
    list.push_back({{"center", {e.cx, e.cy}},
                    {"semi_axes", {e.semi_x, e.semi_y}},
                    {"rotation", e.rotation},
                    {"intensity", e.intensity}});
  }
  return j.dump(2);
}

}  // namespace polyct::imaging
