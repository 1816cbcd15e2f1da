#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "qergo/parallel.hpp"
#include "qergo/rng.hpp"

using namespace qergo;

TEST(DeriveSeed, DeterministicAndKeyedByAllThreeParts) {
  EXPECT_EQ(derive_seed(1, 2, StreamRole::Service), derive_seed(1, 2, StreamRole::Service));
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 4; ++m)
    for (std::uint64_t r = 0; r < 50; ++r)
      for (auto role : {StreamRole::Environment, StreamRole::Service, StreamRole::Auxiliary})
        seen.insert(derive_seed(m, r, role));
  EXPECT_EQ(seen.size(), 4u * 50u * 3u);
}

TEST(DeriveSeed, HighWordMatters) {
  EXPECT_NE(derive_seed(1, 0, StreamRole::Environment), derive_seed(1 + (1ull << 32), 0, StreamRole::Environment));
  EXPECT_NE(derive_seed(0, 1, StreamRole::Environment), derive_seed(0, 1 + (1ull << 32), StreamRole::Environment));
}

TEST(Stream, ReproducibleFromSeed) {
  Stream a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.bits(), b.bits());
    EXPECT_EQ(a.exponential(), b.exponential());
    EXPECT_EQ(a.normal(), b.normal());
  }
}

TEST(Stream, UniformRanges) {
  Stream s(3);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const double v = s.uniform_open();
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Stream, ExponentialAndNormalMoments) {
  Stream s(5);
  const int n = 200000;
  std::vector<double> e(n), g(n);
  for (int i = 0; i < n; ++i) {
    e[i] = s.exponential();
    g[i] = s.normal();
  }
  const auto me = sample_moments(e);
  const auto mg = sample_moments(g);
  EXPECT_NEAR(me.mean, 1.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(me.stdev, 1.0, 0.01);
  EXPECT_NEAR(mg.mean, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(mg.stdev, 1.0, 0.01);
}

TEST(CompensatedSum, RecoversSmallTermsNextToLargeOnes) {
  CompensatedSum sum;
  sum.add(1e16);
  for (int i = 0; i < 1000; ++i) sum.add(1.0);
  sum.add(-1e16);
  EXPECT_EQ(sum.value(), 1000.0);
}

TEST(ParallelFor, SlotsIndependentOfWorkerCount) {
  std::vector<double> one(1000), many(1000);
  parallel_for(one.size(), 1, [&](std::size_t i) { one[i] = Stream(i).uniform(); });
  parallel_for(many.size(), 7, [&](std::size_t i) { many[i] = Stream(i).uniform(); });
  EXPECT_EQ(one, many);
}

TEST(ParallelFor, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 4) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}
