#pragma once

#include <cstdint>

namespace dlen {

// SplitMix64 (Steele, Lea, Flood 2014): a 64-bit counter passed through a fixed
// mixing function. All derived draws (uniform, normal, integer ranges) are computed
// here rather than via <random> distributions, whose algorithms vary between standard
// libraries, so one seed gives the same stream on every platform.
class Prng {
 public:
  explicit Prng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound), bound > 0 (rejection sampling, unbiased).
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via the Box-Muller transform (one value per call, no caching).
  double normal();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// Derives an independent seed for a named sub-stream.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dlen
