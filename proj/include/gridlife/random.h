#ifndef GRIDLIFE_RANDOM_H
#define GRIDLIFE_RANDOM_H

#include <cmath>
#include <cstdint>
#include <random>

namespace gridlife {

// All randomness in the project flows through this engine. The raw engine
// output sequence is fixed by the standard; the helpers below avoid the
// implementation-defined std distributions so streams are portable.
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection sampling.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound + 1) % bound;
  std::uint64_t draw = rng();
  while (draw > limit) draw = rng();
  return draw % bound;
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal draw (Box-Muller, one value per call).
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Seed for stream `index` derived from a base seed (seed + index).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return base + index;
}

}  // namespace gridlife

#endif  // GRIDLIFE_RANDOM_H
