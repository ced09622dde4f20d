#include "rode/core/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"

using namespace rode;

TEST(Rng, DeterministicGivenSeed) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, NamedStreamsIndependentOfCreationOrder) {
  Rng s1 = Rng::stream(7, "env");
  Rng s2 = Rng::stream(7, "policy");
  Rng s1_again = Rng::stream(7, "env");
  EXPECT_EQ(s1.next_u64(), s1_again.next_u64());
  Rng t1 = Rng::stream(7, "env"), t2 = Rng::stream(8, "env");
  EXPECT_NE(t1.next_u64(), t2.next_u64());
  (void)s2;
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(1);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_LT(lo, 0.01);
  EXPECT_GT(hi, 0.99);
  // Mean of N uniforms: sd = 1/sqrt(12N); allow 4 sigma.
  EXPECT_NEAR(sum / N, 0.5, 4.0 / std::sqrt(12.0 * N));
}

TEST(Rng, NextIntUniformWithin3Sigma) {
  Rng rng(2);
  const int K = 7, N = 70000;
  std::vector<int> counts(K, 0);
  for (int i = 0; i < N; ++i) ++counts[static_cast<std::size_t>(rng.next_int(K))];
  EXPECT_TRUE(testutil::within_3_sigma(counts, std::vector<double>(K, 1.0 / K), N));
}

TEST(Rng, NormalMomentsSane) {
  Rng rng(3);
  const int N = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < N; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / N;
  const double var = sq / N - mean * mean;
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(static_cast<double>(N)));
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Rng, WeightedIndexMatchesWeights) {
  Rng rng(4);
  const std::vector<double> w = {1.0, 3.0, 0.0, 6.0};
  const int N = 50000;
  std::vector<int> counts(w.size(), 0);
  for (int i = 0; i < N; ++i) ++counts[static_cast<std::size_t>(rng.weighted_index(w))];
  EXPECT_EQ(counts[2], 0);
  EXPECT_TRUE(testutil::within_3_sigma(counts, {0.1, 0.3, 0.0, 0.6}, N));
}

TEST(Rng, SampleWithoutReplacementDistinct) {
  Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<int> s = rng.sample_without_replacement(10, 4);
    ASSERT_EQ(s.size(), 4u);
    for (std::size_t i = 0; i < s.size(); ++i) {
      ASSERT_GE(s[i], 0);
      ASSERT_LT(s[i], 10);
      for (std::size_t j = i + 1; j < s.size(); ++j) ASSERT_NE(s[i], s[j]);
    }
  }
}

TEST(Rng, ErrorsOnBadArguments) {
  Rng rng(6);
  EXPECT_THROW(rng.next_int(0), std::runtime_error);
  EXPECT_THROW(rng.weighted_index({0.0, 0.0}), std::runtime_error);
  EXPECT_THROW(rng.weighted_index({-1.0, 2.0}), std::runtime_error);
  EXPECT_THROW(rng.sample_without_replacement(3, 4), std::runtime_error);
}
