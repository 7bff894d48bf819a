#pragma once

#include <cstdint>

namespace rmdp {

/// Deterministic 64-bit generator (splitmix64). Sequences are identical
/// across platforms for a given seed, which keeps trajectories and training
/// runs reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n >= 1. Unbiased via rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Independent stream derived from (seed, stream index).
  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    Rng mix(seed);
    mix.state_ ^= 0xd1342543de82ef95ULL * (stream + 1);
    mix.next_u64();
    return mix;
  }

 private:
  std::uint64_t state_;
};

}  // namespace rmdp
