#pragma once

#include <cstdint>
#include <random>

namespace fibm {

/// Stream tags keep the randomness of different subsystems disjoint even
/// when they are driven from the same user seed.
enum class StreamTag : std::uint64_t {
  monte_carlo = 0x6d6f6e74652d6361ULL,
  vrr_walk = 0x7672722d77616c6bULL,
  synthetic = 0x73796e7468657469ULL,
  validation = 0x76616c6964617465ULL,
};

/// SplitMix64 finalizer (Steele, Lea, Flood). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of substream `index` under `tag`. Depends only on its arguments, so
/// work items can be processed in any order or on any thread.
constexpr std::uint64_t derive_seed(std::uint64_t base, StreamTag tag,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(base ^ static_cast<std::uint64_t>(tag)) + mix64(index));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t base, StreamTag tag, std::uint64_t index)
      : engine_(derive_seed(base, tag, index)) {}

  /// Uniform double in [0, 1) with 53 random bits; identical on every platform.
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next() noexcept { return engine_(); }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound)) % bound;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fibm
