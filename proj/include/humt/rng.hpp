#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace humt {

/// Counter-based SplitMix64: draw i is mix64(seed + (i + 1) * golden_gamma).
/// Every draw is a pure function of (seed, counter), so identical seeds produce
/// identical streams on every platform. Integer and real draws avoid the
/// implementation-defined std distributions.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() noexcept {
    ++counter_;
    return mix(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (true) {
      const std::uint64_t x = next();
      if (x >= threshold) return x % bound;
    }
  }

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

/// Uniform sample of `count` distinct indices from [0, n) via partial
/// Fisher-Yates; returned in draw order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                           CounterRng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count && i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count < n ? count : n);
  return idx;
}

template <typename T>
void shuffle(std::span<T> items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace humt
