#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace vfg {

// Seedable random source built on std::mt19937_64, whose output sequence is
// fully specified by the C++ standard and therefore identical on every
// platform. The distributions are implemented here by hand because the
// standard-library distribution classes are implementation-defined:
//   uniform01  -> top 53 bits of one engine draw, scaled by 2^-53
//   normal     -> Box-Muller transform on two uniform01 draws
struct StableRng {
  explicit StableRng(std::uint64_t seed) : engine(seed) {}

  std::mt19937_64 engine;

  // Uniform double in [0, 1).
  double uniform01() {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Uses rejection to avoid modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t draw;
    do {
      draw = engine();
    } while (draw >= limit);
    return draw % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller; one value per call, the paired value is
  // discarded to keep the draw count per event fixed and documented.
  double normal() {
    constexpr double two_pi = 6.283185307179586476925286766559;
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }
};

}  // namespace vfg
