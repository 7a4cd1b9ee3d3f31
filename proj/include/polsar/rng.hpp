#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace polsar {

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/**
 * Seedable random stream with a fully specified output sequence.
 *
 * The engine is std::mt19937_64, whose sequence is fixed by the standard.
 * Distributions are written out here because the std:: distribution
 * objects are implementation-defined and would break cross-platform
 * reproducibility.
 */
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Stream number `index` of the family identified by (seed, tag).
  static Stream derive(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    return Stream(splitmix64(splitmix64(seed ^ splitmix64(tag)) + index));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % bound;
  }

  /// Standard normal via the Box-Muller transform; pairs are cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fisher-Yates shuffle driven by a Stream.
template <typename Container>
void shuffle(Container& items, Stream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace polsar
