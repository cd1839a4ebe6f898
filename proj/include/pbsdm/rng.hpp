#pragma once

#include <cstdint>
#include <limits>

namespace pbsdm {

// SplitMix64 finaliser; also used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based SplitMix64 generator: the i-th output is mix64(seed + (i+1)*gamma),
// so any stream is fully determined by its seed. Satisfies
// std::uniform_random_bit_generator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += kGamma;
    return mix64(state_);
  }

  // Uniform on [0,1) with 53 random bits; identical on every platform.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

// Seed of substream `index` under `base`: base XOR index, mixed.
constexpr std::uint64_t substream_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return mix64(base ^ index);
}

}  // namespace pbsdm
