#pragma once

#include <array>
#include <cstdint>

namespace polyct {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
//
// A generator is identified by (seed, stream); the 64-bit seed is the Philox
// key and the 64-bit stream id occupies the upper half of the 128-bit counter.
// Distinct streams never share counter blocks, so every row of an ensemble,
// every noise draw and every signal can be regenerated independently.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Standard normal via the Box-Muller transform.
  double normal() noexcept;
  // +1 or -1 with equal probability.
  double sign() noexcept { return (next_u64() >> 63) ? 1.0 : -1.0; }

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int available_ = 0;  // unread 64-bit words in buffer_
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// Stream ids are tagged by purpose in the top 16 bits so that, e.g., row 3 of
// an ensemble and noise draw 3 come from unrelated counter ranges.
enum class StreamTag : std::uint64_t {
  gaussian_row = 1,
  rwht_signs = 2,
  noise = 3,
  signal = 4,
  experiment = 5,
};

constexpr std::uint64_t make_stream(StreamTag tag, std::uint64_t index) noexcept {
  return (static_cast<std::uint64_t>(tag) << 48) | (index & ((std::uint64_t{1} << 48) - 1));
}

// Derives a child seed, e.g. one per trial of an experiment grid.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept;

}  // namespace polyct
