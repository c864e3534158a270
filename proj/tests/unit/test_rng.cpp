#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "humt/rng.hpp"

using humt::CounterRng;

TEST(Rng, SameSeedSameStream) {
  CounterRng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
}

TEST(Rng, CounterResume) {
  CounterRng a(7);
  for (int i = 0; i < 10; ++i) a.next();
  CounterRng b(7, a.counter());
  EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, KnownFirstDraw) {
  // SplitMix64 reference: the first output for seed 0 is mix(0x9E3779B97F4A7C15).
  CounterRng r(0);
  EXPECT_EQ(r.next(), 0xE220A8397B1DCDAFULL);
}

TEST(Rng, BelowStaysInRange) {
  CounterRng r(1);
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 7ULL, 1000ULL}) {
    for (int i = 0; i < 1000; ++i) EXPECT_LT(r.below(bound), bound);
  }
}

TEST(Rng, UniformInUnitInterval) {
  CounterRng r(5);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  CounterRng r(9);
  const auto s = humt::sample_without_replacement(50, 20, r);
  ASSERT_EQ(s.size(), 20u);
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 20u);
  for (auto i : s) EXPECT_LT(i, 50u);
  CounterRng r2(9);
  EXPECT_EQ(humt::sample_without_replacement(50, 20, r2), s);
}

// Each element of a 10-pool is drawn by a 5-sample with probability 0.5.
TEST(Rng, SampleInclusionIsUniform) {
  constexpr int kSeeds = 10000;
  std::vector<int> hits(10, 0);
  for (int seed = 0; seed < kSeeds; ++seed) {
    CounterRng r(static_cast<std::uint64_t>(seed));
    for (auto i : humt::sample_without_replacement(10, 5, r)) ++hits[i];
  }
  const double sigma = std::sqrt(kSeeds * 0.25);
  for (int h : hits) EXPECT_LT(std::abs(h - kSeeds * 0.5), 3 * sigma);
}

TEST(Rng, ShuffleIsPermutation) {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  CounterRng r(3);
  auto w = v;
  humt::shuffle(std::span<int>(w), r);
  EXPECT_NE(w, v);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(w, v);
}
