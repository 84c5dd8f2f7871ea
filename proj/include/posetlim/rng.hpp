#pragma once

#include <cstdint>

namespace posetlim {

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, counter), so results do not depend on evaluation order or
// on how work is split between threads.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t counter) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) + counter);
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Sequential view over one counter stream; cheap to copy, no hidden state
/// beyond the position.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}

  constexpr std::uint64_t next() { return counter_hash(seed_, stream_, counter_++); }
  constexpr double uniform() { return to_unit(next()); }

  /// Uniform integer in [0, bound); bound must be positive.
  constexpr std::uint64_t below(std::uint64_t bound) {
    // Lemire's multiply-shift; the bias is below 2^-64 * bound and irrelevant here.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  // UniformRandomBitGenerator, for std::shuffle and friends.
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  constexpr result_type operator()() { return next(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace posetlim
