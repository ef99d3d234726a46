#pragma once

#include <cmath>
#include <cstdint>

namespace lulcseg {

// SplitMix64: small-state counter-based generator. Every random draw in the
// project flows through one of these so that a (seed, draw-order) pair fully
// determines the result, independent of platform RNG libraries.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller; consumes exactly two uniforms per draw.
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    // Guard log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Normal(0, std) rejected outside +-clip*std.
  double truncated_normal(double stddev, double clip = 2.0) {
    for (;;) {
      double z = normal();
      if (z >= -clip && z <= clip) return z * stddev;
    }
  }

  // Gamma(shape k, scale theta) by Marsaglia-Tsang; k > 0.
  double gamma(double k, double theta) {
    if (k < 1.0) {
      // Boost to k+1 and scale back with a uniform power.
      double u = next_double();
      if (u <= 0.0) u = 0x1.0p-53;
      return gamma(k + 1.0, theta) * std::pow(u, 1.0 / k);
    }
    double d = k - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = next_double();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * theta;
      if (u <= 0.0) u = 0x1.0p-53;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * theta;
    }
  }

  // Derive an independent deterministic substream; does not advance *this.
  SplitMix64 fork(std::uint64_t stream) const {
    SplitMix64 mix(state_ ^ (0xD1B54A32D192ED03ull * (stream + 1)));
    return SplitMix64(mix.next_u64());
  }

 private:
  std::uint64_t state_;
};

}  // namespace lulcseg
