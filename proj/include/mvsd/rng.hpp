#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace mvsd {

/// SplitMix64 step (Steele, Lea & Flood). Used for seeding and hashing.
std::uint64_t splitmix64(std::uint64_t& state);

/// 64-bit FNV-1a hash of a byte string.
std::uint64_t fnv1a64(std::string_view text);

/// Seed for a named sub-stream: splitmix64 applied to seed XOR fnv1a64(name).
/// Every module derives its own stream from the run seed this way.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

/// xoshiro256** generator (Blackman & Vigna), state filled by SplitMix64.
///
/// All derived draws use explicit algorithms (no <random> distributions) so a
/// given seed yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);
  /// Unbiased integer in [0, n) via Lemire's multiply-and-reject.
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p);
  /// Standard normal via the Box-Muller transform (one value per call).
  double normal();
  /// Gamma(shape, 1) via Marsaglia & Tsang; shape < 1 uses the boost U^(1/shape).
  double gamma(double shape);
  double beta(double a, double b);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace mvsd
