#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace mfk {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based normal variates: the draw for (seed, stream, counter) is a
/// pure function of those three integers, so per-particle streams stay
/// reproducible under any evaluation order.
class CounterNormal {
 public:
  CounterNormal(std::uint64_t seed, std::uint64_t stream)
      : key_(mix64(mix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL))) {}

  /// Pair of independent N(0, 1) draws for `counter` (Box-Muller).
  std::pair<double, double> pair(std::uint64_t counter) const {
    const std::uint64_t h1 = mix64(key_ ^ mix64(2 * counter));
    const std::uint64_t h2 = mix64(key_ ^ mix64(2 * counter + 1));
    const double u1 = (static_cast<double>(h1 >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  /// Single draw; index 2c and 2c + 1 share one Box-Muller pair.
  double operator()(std::uint64_t index) const {
    const auto [a, b] = pair(index / 2);
    return (index % 2 == 0) ? a : b;
  }

 private:
  std::uint64_t key_;
};

}  // namespace mfk
