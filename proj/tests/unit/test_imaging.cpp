#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "polyct/error.hpp"
#include "polyct/imaging.hpp"
#include "polyct/rng.hpp"

using namespace polyct;
using namespace polyct::imaging;

namespace {
Vector random_vector(std::int64_t n, std::uint64_t seed) {
  CounterRng g(seed, 23);
  Vector v(n);
  for (auto& x : v) x = g.normal();
  return v;
}
}  // namespace

TEST_CASE("shepp-logan phantom") {
  const auto classic = shepp_logan(128);
  CHECK(classic.at(64, 64) > 0.0);
  CHECK(classic.at(0, 0) == 0.0);
  CHECK(classic.at(127, 127) == 0.0);
  CHECK(classic.at(0, 127) == 0.0);
  CHECK(classic.data.minCoeff() >= 0.0);
  // The skull ring of the original table has intensity 2 - 0.98 = 1.02 on top of 0.
  CHECK(classic.data.maxCoeff() == doctest::Approx(2.0));

  const auto big = shepp_logan(64, 2.0, 0.5, 4.0);
  CHECK(big.data.maxCoeff() <= 2.0 / 4.0 + 1e-15);
  CHECK(big.at(0, 0) == 0.0);

  const auto ph = shepp_logan_phantom(64, 2.0, 0.5, 4.0);
  const auto& e = ph.ellipses[kCenterEllipse];
  CHECK(e.cy == doctest::Approx(0.1));
  const auto base = shepp_logan_table()[kCenterEllipse];
  CHECK(e.semi_x == doctest::Approx(2.0 * base.semi_x));
  CHECK(e.semi_y == doctest::Approx(2.0 * base.semi_y));
  // Pixel at the centre of the enlarged ellipse paints the final value / scale.
  const std::int64_t row = static_cast<std::int64_t>(std::floor((1.0 - 0.1) / 2.0 * 64));
  CHECK(big.at(row, 32) == doctest::Approx(0.5 / 4.0));

  const auto modified = shepp_logan(64, 1.0, 1.0, PhantomTable::modified);
  CHECK(modified.data.maxCoeff() == doctest::Approx(1.0));
  const auto js = nlohmann::json::parse(phantom_json(ph));
  CHECK(js["ellipses"].size() == ph.ellipses.size());
}

TEST_CASE("ray tracing") {
  const std::int64_t n = 16;
  const double pixel = 2.0 / n;
  // Horizontal-normal ray at theta = 0, s slightly off the centre line: a
  // vertical line crossing one column of n pixels.
  auto ray = trace_ray(n, 0.0, 0.5 * pixel);
  double len = 0.0;
  for (auto [idx, l] : ray) len += l;
  CHECK(len == doctest::Approx(n * pixel).epsilon(1e-12));
  CHECK(ray.size() == static_cast<std::size_t>(n));

  for (int t = 0; t < 40; ++t) {
    CounterRng g(7, t);
    const double theta = g.uniform() * M_PI;
    const double s = (2.0 * g.uniform() - 1.0) * std::sqrt(2.0);
    double total = 0.0;
    for (auto [idx, l] : trace_ray(n, theta, s)) {
      CHECK(l > 0.0);
      CHECK(idx >= 0);
      CHECK(idx < n * n);
      total += l;
    }
    CHECK(total == doctest::Approx(chord_length(theta, s)).epsilon(1e-10));
    CHECK(total <= std::sqrt(2.0) * n * pixel + 1e-12);
  }
  CHECK(chord_length(0.0, 1.5) == 0.0);
  CHECK(trace_ray(n, 0.0, 1.5).empty());
}

TEST_CASE("radon ensemble") {
  const std::int64_t n = 12;
  const auto ens = radon_ensemble(n, 7, n, 0.25);
  CHECK(ens.samples() == 7 * n);
  CHECK(ens.dim() == n * n);
  const auto geo = radon_geometry(n, 7, n, 0.25);
  const Vector ones = Vector::Ones(n * n);
  const Vector sums = ens.apply(ones);
  for (std::int64_t a = 0; a < 7; ++a)
    for (std::int64_t k = 0; k < n; ++k)
      CHECK(sums[a * n + k] ==
            doctest::Approx(chord_length(geo.angles[static_cast<std::size_t>(a)],
                                         geo.detectors[static_cast<std::size_t>(k)]))
                .epsilon(1e-10));
  for (int t = 0; t < 10; ++t) {
    const Vector x = random_vector(n * n, 10 + t);
    const Vector u = random_vector(7 * n, 30 + t);
    CHECK(std::abs(ens.apply(x).dot(u) - x.dot(ens.adjoint(u))) <= 1e-10 * std::max(1.0, std::abs(x.dot(ens.adjoint(u)))));
  }
  // Angle-0 ray through the centre of a constant image spans n pixels.
  const auto zero = radon_ensemble(n, 1, n + 1, 0.0);
  CHECK(zero.apply(ones)[n / 2] == doctest::Approx(n * 2.0 / n).epsilon(1e-12));
}

TEST_CASE("psnr") {
  const tv::ImageVec truth = tv::ImageVec::from_matrix((Matrix(2, 2) << 1, 0, 0, 0).finished());
  CHECK(std::isinf(psnr(truth, truth)));
  const tv::ImageVec off(truth.data.array() + 0.1, 2);
  CHECK(psnr(off, truth) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(tv::ImageVec(3.0 * off.data, 2), tv::ImageVec(3.0 * truth.data, 2)) ==
        doctest::Approx(20.0).epsilon(1e-12));
  CHECK_THROWS_AS(psnr(truth, tv::ImageVec::zeros(2)), Error);
}

TEST_CASE("image writers") {
  const auto dir = std::filesystem::temp_directory_path() / "polyct_imaging_test";
  std::filesystem::create_directories(dir);
  const auto img = shepp_logan(8);
  write_pgm16((dir / "a.pgm").string(), img);
  std::ifstream in(dir / "a.pgm", std::ios::binary);
  std::string magic, dims, maxv;
  std::getline(in, magic);
  std::getline(in, dims);
  std::getline(in, maxv);
  CHECK(magic == "P5");
  CHECK(dims == "8 8");
  CHECK(maxv == "65535");
  CHECK(std::filesystem::file_size(dir / "a.pgm") == 3 + 4 + 6 + 2 * 64);
  write_csv((dir / "a.csv").string(), img);
  std::ifstream csv(dir / "a.csv");
  int lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  CHECK(lines == 8);
  std::filesystem::remove_all(dir);
}
