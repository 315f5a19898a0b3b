#include <filesystem>

#include "doctest.h"
#include "polyct/container.hpp"
#include "polyct/error.hpp"
#include "polyct/imaging.hpp"

using namespace polyct;
using namespace polyct::sensing;

TEST_CASE("ensembles round-trip through the container") {
  for (const auto& ens : {gaussian_ensemble(5, 7, 3), rwht_ensemble(8, 3, 4),
                          imaging::radon_ensemble(6, 4, 6)}) {
    const auto bytes = io::encode_ensemble(ens);
    const auto back = io::decode_ensemble(bytes);
    CHECK(back.kind() == ens.kind());
    CHECK(back.dim() == ens.dim());
    CHECK(back.samples() == ens.samples());
    CHECK(back.seed() == ens.seed());
    CHECK(back.to_dense() == ens.to_dense());
  }
}

TEST_CASE("measurements round-trip and sidecar") {
  const auto ens = gaussian_ensemble(4, 9, 1);
  const auto ms = generate_measurements(ens, sample_signal(4, 2.0, 2),
                                        NoiseModel::poisson_gaussian(1e4), 3);
  const auto back = io::decode_measurements(io::encode_measurements(ms));
  CHECK(back.y == ms.y);
  CHECK(back.noise == ms.noise);
  CHECK(back.detector_scale == ms.detector_scale);
  REQUIRE(back.truth.has_value());
  CHECK(*back.truth == *ms.truth);

  const auto dir = std::filesystem::temp_directory_path() / "polyct_container_test";
  std::filesystem::create_directories(dir);
  io::save_measurements(ms, dir / "m.bin");
  CHECK(std::filesystem::exists(dir / "m.bin.json"));
  CHECK(io::load_measurements(dir / "m.bin").y == ms.y);
  io::save_ensemble(ens, dir / "e.bin");
  CHECK(io::load_ensemble(dir / "e.bin").to_dense() == ens.to_dense());
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt containers are rejected") {
  auto bytes = io::encode_ensemble(gaussian_ensemble(3, 3, 1));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(io::decode_ensemble(bad_magic), Error);
  bytes.resize(bytes.size() - 4);
  try {
    io::decode_ensemble(bytes);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io_error);
  }
}
