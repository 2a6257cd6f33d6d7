#include "dlen/prng.hpp"

#include <cmath>

#include "dlen/error.hpp"

namespace dlen {

namespace {

std::uint64_t splitmix_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Prng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return splitmix_mix(state_);
}

double Prng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Prng::below(std::uint64_t bound) {
  DLEN_REQUIRE(bound > 0, "Prng::below: bound must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

double Prng::normal() {
  // 1 - uniform() lies in (0, 1], keeping the logarithm finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix_mix(seed ^ splitmix_mix(stream + 0x9E3779B97F4A7C15ULL));
}

}  // namespace dlen
