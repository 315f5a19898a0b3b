#include "polyct/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "polyct/error.hpp"

namespace polyct::io {

namespace {

constexpr char kEnsembleMagic[8] = {'P', 'O', 'L', 'Y', 'C', 'T', 'E', 'N'};
constexpr char kMeasurementMagic[8] = {'P', 'O', 'L', 'Y', 'C', 'T', 'M', 'S'};

class Writer {
 public:
  void magic(const char (&tag)[8]) { bytes_.insert(bytes_.end(), tag, tag + 8); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int k = 0; k < width; ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expect_magic(const char (&tag)[8]) {
    need(8);
    if (std::memcmp(bytes_.data() + pos_, tag, 8) != 0) {
      throw Error(ErrorCode::io_error, "bad container magic");
    }
    pos_ += 8;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::io_error, "truncated container");
  }
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int k = 0; k < width; ++k) v |= static_cast<std::uint64_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  out << text << '\n';
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

std::vector<std::uint8_t> encode_ensemble(const sensing::SensingEnsemble& ensemble) {
  Writer w;
  w.magic(kEnsembleMagic);
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(ensemble.kind()));
  w.u64(static_cast<std::uint64_t>(ensemble.dim()));
  w.u64(static_cast<std::uint64_t>(ensemble.samples()));
  w.u64(ensemble.seed());
  if (const auto* g = ensemble.gaussian_payload()) {
    for (Eigen::Index i = 0; i < g->rows.rows(); ++i)
      for (Eigen::Index j = 0; j < g->rows.cols(); ++j) w.f64(g->rows(i, j));
  } else if (const auto* r = ensemble.rwht_payload()) {
    w.u64(static_cast<std::uint64_t>(r->signs.cols()));
    for (Eigen::Index j = 0; j < r->signs.cols(); ++j)
      for (Eigen::Index i = 0; i < r->signs.rows(); ++i)
        w.u8(static_cast<std::uint8_t>(static_cast<std::int8_t>(r->signs(i, j))));
  } else {
    const auto& rows = ensemble.explicit_payload()->rows;
    w.u64(static_cast<std::uint64_t>(rows.nonZeros()));
    for (Eigen::Index i = 0; i <= rows.rows(); ++i)
      w.u64(static_cast<std::uint64_t>(rows.outerIndexPtr()[i]));
    for (Eigen::Index k = 0; k < rows.nonZeros(); ++k)
      w.u64(static_cast<std::uint64_t>(rows.innerIndexPtr()[k]));
    for (Eigen::Index k = 0; k < rows.nonZeros(); ++k) w.f64(rows.valuePtr()[k]);
  }
  return w.take();
}

sensing::SensingEnsemble decode_ensemble(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kEnsembleMagic);
  if (r.u32() != kContainerVersion) throw Error(ErrorCode::io_error, "unsupported version");
  const auto kind = static_cast<sensing::EnsembleKind>(r.u32());
  const auto dim = static_cast<std::int64_t>(r.u64());
  const auto samples = static_cast<std::int64_t>(r.u64());
  const auto seed = r.u64();
  if (dim < 1 || samples < 1) throw Error(ErrorCode::io_error, "bad ensemble shape");
  switch (kind) {
    case sensing::EnsembleKind::gaussian: {
      Matrix rows(samples, dim);
      for (std::int64_t i = 0; i < samples; ++i)
        for (std::int64_t j = 0; j < dim; ++j) rows(i, j) = r.f64();
      return sensing::SensingEnsemble::from_gaussian(std::move(rows), seed);
    }
    case sensing::EnsembleKind::rwht: {
      const auto ell = static_cast<std::int64_t>(r.u64());
      if (ell * dim != samples) throw Error(ErrorCode::io_error, "rwht shape mismatch");
      Matrix signs(dim, ell);
      for (std::int64_t j = 0; j < ell; ++j)
        for (std::int64_t i = 0; i < dim; ++i) signs(i, j) = static_cast<std::int8_t>(r.u8());
      return sensing::SensingEnsemble::from_rwht(std::move(signs), seed);
    }
    case sensing::EnsembleKind::explicit_matrix: {
      const auto nnz = static_cast<std::int64_t>(r.u64());
      std::vector<std::int64_t> offsets(static_cast<std::size_t>(samples + 1));
      for (auto& o : offsets) o = static_cast<std::int64_t>(r.u64());
      if (offsets.front() != 0 || offsets.back() != nnz) {
        throw Error(ErrorCode::io_error, "bad row offsets");
      }
      std::vector<std::int64_t> cols(static_cast<std::size_t>(nnz));
      for (auto& c : cols) {
        c = static_cast<std::int64_t>(r.u64());
        if (c < 0 || c >= dim) throw Error(ErrorCode::io_error, "column out of range");
      }
      std::vector<Eigen::Triplet<double, std::int64_t>> triplets;
      triplets.reserve(static_cast<std::size_t>(nnz));
      for (std::int64_t i = 0; i < samples; ++i) {
        for (auto k = offsets[i]; k < offsets[i + 1]; ++k) {
          triplets.emplace_back(i, cols[static_cast<std::size_t>(k)], 0.0);
        }
      }
      for (auto& t : triplets) t = Eigen::Triplet<double, std::int64_t>(t.row(), t.col(), r.f64());
      SparseRows rows(samples, dim);
      rows.setFromTriplets(triplets.begin(), triplets.end());
      return sensing::SensingEnsemble::from_explicit(std::move(rows), seed);
    }
  }
  throw Error(ErrorCode::io_error, "unknown ensemble kind");
}

std::string ensemble_metadata_json(const sensing::SensingEnsemble& ensemble) {
  nlohmann::json meta = {
      {"format", "polyct.ensemble"},
      {"version", kContainerVersion},
      {"byte_order", "little"},
      {"kind", sensing::to_string(ensemble.kind())},
      {"dim", ensemble.dim()},
      {"samples", ensemble.samples()},
      {"seed", ensemble.seed()},
  };
  if (const auto* r = ensemble.rwht_payload()) meta["oversampling"] = r->signs.cols();
  if (const auto* e = ensemble.explicit_payload()) meta["nonzeros"] = e->rows.nonZeros();
  return meta.dump(2);
}

std::vector<std::uint8_t> encode_measurements(const sensing::MeasurementSet& set) {
  Writer w;
  w.magic(kMeasurementMagic);
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(set.noise));
  w.u64(static_cast<std::uint64_t>(set.y.size()));
  w.f64(set.detector_scale);
  w.u8(set.truth ? 1 : 0);
  w.f64(set.truth_norm);
  w.u64(set.truth ? static_cast<std::uint64_t>(set.truth->size()) : 0);
  for (Eigen::Index i = 0; i < set.y.size(); ++i) w.f64(set.y[i]);
  if (set.truth) {
    for (Eigen::Index i = 0; i < set.truth->size(); ++i) w.f64((*set.truth)[i]);
  }
  return w.take();
}

sensing::MeasurementSet decode_measurements(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kMeasurementMagic);
  if (r.u32() != kContainerVersion) throw Error(ErrorCode::io_error, "unsupported version");
  sensing::MeasurementSet set;
  set.noise = static_cast<sensing::NoiseKind>(r.u32());
  if (set.noise != sensing::NoiseKind::clean && set.noise != sensing::NoiseKind::poisson_gaussian) {
    throw Error(ErrorCode::io_error, "unknown noise kind");
  }
  const auto samples = static_cast<std::int64_t>(r.u64());
  set.detector_scale = r.f64();
  const bool has_truth = r.u8() != 0;
  set.truth_norm = r.f64();
  const auto truth_dim = static_cast<std::int64_t>(r.u64());
  set.y.resize(samples);
  for (std::int64_t i = 0; i < samples; ++i) set.y[i] = r.f64();
  if (has_truth) {
    Vector truth(truth_dim);
    for (std::int64_t i = 0; i < truth_dim; ++i) truth[i] = r.f64();
    set.truth = std::move(truth);
  }
  if (!r.at_end()) throw Error(ErrorCode::io_error, "trailing bytes in container");
  return set;
}

std::string measurements_metadata_json(const sensing::MeasurementSet& set) {
  nlohmann::json meta = {
      {"format", "polyct.measurements"},
      {"version", kContainerVersion},
      {"byte_order", "little"},
      {"noise", set.noise == sensing::NoiseKind::clean ? "clean" : "poisson-gaussian"},
      {"samples", set.y.size()},
      {"detector_scale", set.detector_scale},
      {"has_truth", set.truth.has_value()},
      {"truth_norm", set.truth_norm},
  };
  return meta.dump(2);
}

void save_ensemble(const sensing::SensingEnsemble& ensemble, const std::filesystem::path& path) {
  write_file(path, encode_ensemble(ensemble));
  write_text(sidecar(path), ensemble_metadata_json(ensemble));
}

sensing::SensingEnsemble load_ensemble(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_ensemble(bytes);
}

void save_measurements(const sensing::MeasurementSet& set, const std::filesystem::path& path) {
  write_file(path, encode_measurements(set));
  write_text(sidecar(path), measurements_metadata_json(set));
}

sensing::MeasurementSet load_measurements(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_measurements(bytes);
}

}  // namespace polyct::io
