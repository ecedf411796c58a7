#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace evdep {

/// Deterministic 64-bit generator with independently keyed streams.
///
/// A (seed, stream) pair fully determines the draw sequence, so Monte Carlo
/// replication r can run on stream r and produce identical numbers regardless
/// of scheduling or thread count. The state is xoshiro256**, expanded from the
/// (seed, stream) key with SplitMix64. All floating-point conversions are done
/// from raw bits, so sequences are reproducible across platforms.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {
    // Avalanche the key so that nearby (seed, stream) pairs land far apart,
    // then expand to the four state words.
    std::uint64_t z = seed ^ mix(0x9E3779B97F4A7C15ULL * (stream + 1));
    for (auto& word : state_) {
      z += 0x9E3779B97F4A7C15ULL;
      word = mix(z);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform draw strictly inside (0,1): 53-bit midpoints, never 0 or 1.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Unit exponential draw, floored at 1e-300 so reciprocals stay finite.
  double exponential() {
    double e = -std::log(uniform01());
    return e < 1e-300 ? 1e-300 : e;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::array<std::uint64_t, 4> state_;
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace evdep
