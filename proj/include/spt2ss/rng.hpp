#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace spt2ss {

/// Deterministic random stream: xoshiro256** seeded through splitmix64.
/// Two generators built from the same seed produce identical draws, and
/// child streams from split(index) depend only on (seed, index), never on
/// how many values the parent has already produced.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53 mantissa bits.
  double next_double();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// exp(uniform(log lo, log hi)); requires 0 < lo <= hi.
  double log_uniform(double lo, double hi);

  bool bernoulli(double p);

  /// Uniform index in [0, n); n > 0. Fixed-point multiply, no rejection.
  std::uint64_t next_below(std::uint64_t n);

  /// Child stream keyed by (seed, index).
  Rng split(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

  /// Fisher-Yates, draw order fixed from the back of the range.
  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t j = next_below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
};

}  // namespace spt2ss
