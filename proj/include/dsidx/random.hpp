#pragma once

#include <cstdint>

namespace dsidx {

/// Counter-based generator: the value at (seed, stream, counter) is the
/// SplitMix64 finalizer applied to key(seed, stream) + (counter + 1) * golden
/// gamma. Any position of a stream can be produced independently, so outputs
/// do not depend on call order.
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + kGamma))) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + (counter + 1) * kGamma); }

  /// Uniform in the open interval (0, 1).
  double uniform_open(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(counter)) * n) >> 64);
  }

  /// N(0,1) by inverse CDF of uniform_open.
  double normal(std::uint64_t counter) const;

 private:
  std::uint64_t key_;
};

}  // namespace dsidx
