#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qtrack {

// All randomness in the library flows through these helpers instead of
// std::uniform_*_distribution, whose output sequences differ between
// standard library implementations. Given the same seed the generated
// streams are identical on every platform, which is what the manifest
// replay contract requires.
using Rng = std::mt19937_64;

inline double uniform_real(Rng& rng, double lo, double hi) {
  // 53-bit mantissa draw in [0,1)
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// Uniform integer in [0, n-1] via fixed-point multiply; n = 0 is invalid.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const unsigned __int128 m =
      static_cast<unsigned __int128>(rng()) * static_cast<unsigned __int128>(n);
  return static_cast<std::uint64_t>(m >> 64);
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive range
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

inline bool bernoulli(Rng& rng, double p) { return uniform_real(rng, 0.0, 1.0) < p; }

// Marsaglia polar method with cached second value kept out on purpose:
// stateless per call keeps streams splittable.
inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
  double u, v, s;
  do {
    u = uniform_real(rng, -1.0, 1.0);
    v = uniform_real(rng, -1.0, 1.0);
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return mean + stddev * u * std::sqrt(-2.0 * std::log(s) / s);
}

// Derive an independent stream from a master seed and a stream id.
inline Rng substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace qtrack
