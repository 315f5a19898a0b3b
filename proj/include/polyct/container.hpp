#pragma once

// Binary container for ensembles and measurement sets.
//
// All integers and floats are little-endian. Layout:
//
//   ensemble:     "POLYCTEN" | u32 version | u32 kind | u64 dim | u64 samples
//                 | u64 seed | payload
//     gaussian    m*d f64, row-major
//     rwht        u64 ell | ell*d i8 signs, block j contiguous
//     explicit    u64 nnz | (m+1) u64 row offsets | nnz u64 columns | nnz f64 values
//
//   measurements: "POLYCTMS" | u32 version | u32 noise kind | u64 samples
//                 | f64 detector scale | u8 has_truth | f64 truth norm
//                 | u64 truth dim | m f64 y | truth-dim f64 truth
//
// save_* also writes a JSON sidecar "<path>.json" describing the header fields.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polyct/sensing.hpp"

namespace polyct::io {

inline constexpr std::uint32_t kContainerVersion = 1;

std::vector<std::uint8_t> encode_ensemble(const sensing::SensingEnsemble& ensemble);
sensing::SensingEnsemble decode_ensemble(std::span<const std::uint8_t> bytes);
std::string ensemble_metadata_json(const sensing::SensingEnsemble& ensemble);

std::vector<std::uint8_t> encode_measurements(const sensing::MeasurementSet& set);
sensing::MeasurementSet decode_measurements(std::span<const std::uint8_t> bytes);
std::string measurements_metadata_json(const sensing::MeasurementSet& set);

void save_ensemble(const sensing::SensingEnsemble& ensemble, const std::filesystem::path& path);
sensing::SensingEnsemble load_ensemble(const std::filesystem::path& path);

void save_measurements(const sensing::MeasurementSet& set, const std::filesystem::path& path);
sensing::MeasurementSet load_measurements(const std::filesystem::path& path);

}  // namespace polyct::io
