#pragma once

#include <cstdint>
#include <random>

namespace bregalt {

// std::mt19937_64 output is pinned by the standard, but the <random>
// distributions are not. These helpers keep sampled fixtures and sweeps
// byte-identical across standard libraries.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform01(gen);
}

// Marsaglia polar method, deterministic given the engine state.
inline double gaussian(std::mt19937_64& gen) {
  for (;;) {
    double u = 2.0 * uniform01(gen) - 1.0;
    double v = 2.0 * uniform01(gen) - 1.0;
    double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

}  // namespace bregalt
