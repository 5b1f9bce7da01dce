#pragma once

#include <cstdint>
#include <random>

namespace skillforge {

// Every sampler in the library takes one of these by reference and owns no
// other randomness, so a fixed seed reproduces results bit-exactly.
using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double stddev = 1.0) {
  return std::normal_distribution<double>(0.0, stddev)(rng);
}

// Exponential distribution parameterized by its scale (mean). Scale 0 gives 0.
inline double exponentialScale(Rng& rng, double scale) {
  if (scale <= 0.0) {
    return 0.0;
  }
  return std::exponential_distribution<double>(1.0 / scale)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  return std::bernoulli_distribution(p)(rng);
}

// SplitMix64 step, used to derive independent child seeds from one seed.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace skillforge
