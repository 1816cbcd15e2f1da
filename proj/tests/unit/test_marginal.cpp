#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>

#include "qergo/errors.hpp"
#include "qergo/marginal.hpp"
#include "qergo/parallel.hpp"

using namespace qergo;

TEST(Marginal, RejectsInvalidParameters) {
  EXPECT_THROW(Marginal::exponential(0.0), ConfigError);
  EXPECT_THROW(Marginal::exponential(-1.0), ConfigError);
  EXPECT_THROW(Marginal::uniform(2.0, 1.0), ConfigError);
  EXPECT_THROW(Marginal::uniform(-1.0, 1.0), ConfigError);
  EXPECT_THROW(Marginal::degenerate(-0.5), ConfigError);
  EXPECT_THROW(Marginal::truncated_exponential(1.0, 0.0), ConfigError);
  EXPECT_THROW(Marginal::doubly_exponential(0.0, 1.0), ConfigError);
  EXPECT_THROW(Marginal::doubly_exponential(1.0, -1.0), ConfigError);
}

TEST(Marginal, Means) {
  EXPECT_DOUBLE_EQ(Marginal::exponential(2.0).mean(), 0.5);
  EXPECT_DOUBLE_EQ(Marginal::uniform(1.0, 3.0).mean(), 2.0);
  EXPECT_DOUBLE_EQ(Marginal::degenerate(2.0).mean(), 2.0);
  // Exp(1) truncated to [0, b]: 1 - b e^{-b} / (1 - e^{-b})
  const double b = 3.0;
  EXPECT_NEAR(Marginal::truncated_exponential(1.0, b).mean(), 1.0 - b * std::exp(-b) / (1.0 - std::exp(-b)), 1e-14);
}

TEST(Marginal, DoublyExponentialMeanMatchesSurvivalIntegral) {
  const auto m = Marginal::doubly_exponential(0.01, 4.0);
  boost::math::quadrature::exp_sinh<double> integrator;
  const double survival_integral =
      integrator.integrate([](double z) { return std::exp(-0.01 * std::expm1(4.0 * z)); }, 0.0, kInfinity);
  EXPECT_NEAR(m.mean(), survival_integral, 1e-10);
  const auto tail = m.doubly_exponential_tail();
  ASSERT_TRUE(tail.has_value());
  EXPECT_NEAR(tail->c2, 0.01, 0.0);
  EXPECT_NEAR(tail->c3, 4.0, 0.0);
}

TEST(Marginal, QuantileInvertsCdf) {
  const Marginal laws[] = {Marginal::exponential(1.5), Marginal::uniform(0.5, 2.0),
                           Marginal::truncated_exponential(2.0, 1.0), Marginal::doubly_exponential(0.01, 4.0)};
  for (const auto& m : laws) {
    for (double u : {1e-9, 0.01, 0.3, 0.5, 0.9, 0.999}) {
      EXPECT_NEAR(m.cdf(m.quantile(u)), u, 1e-12) << m.name() << " u=" << u;
      EXPECT_NEAR(1.0 - m.cdf(m.survival_quantile(u)), u, 1e-12) << m.name() << " q=" << u;
    }
  }
}

TEST(Marginal, LogMgfClosedForms) {
  EXPECT_NEAR(Marginal::exponential(1.0).log_mgf(0.5), std::log(2.0), 1e-15);
  EXPECT_NEAR(Marginal::exponential(1.0).log_mgf(-0.5), std::log(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(Marginal::degenerate(2.0).log_mgf(0.7), 1.4, 1e-15);
  EXPECT_NEAR(Marginal::uniform(1.0, 3.0).log_mgf(0.5), std::log((std::exp(1.5) - std::exp(0.5)) / 1.0), 1e-14);
  EXPECT_EQ(Marginal::exponential(3.0).log_mgf(0.0), 0.0);
  EXPECT_THROW(Marginal::exponential(1.0).log_mgf(1.0), DomainError);
}

TEST(Marginal, DoublyExponentialLogMgfMatchesMonteCarlo) {
  const auto m = Marginal::doubly_exponential(0.01, 4.0);
  Stream s(17);
  const int n = 400000;
  for (double a : {-0.5, 0.5, 2.0}) {
    std::vector<double> v(n);
    for (auto& x : v) x = std::exp(a * m.sample(s));
    const auto mom = sample_moments(v);
    const double exact = std::exp(m.log_mgf(a));
    EXPECT_NEAR(mom.mean, exact, 4.0 * mom.stdev / std::sqrt(n)) << "alpha=" << a;
  }
}

TEST(Marginal, SamplesRespectBoundAndMean) {
  const auto m = Marginal::truncated_exponential(1.0, 3.0);
  EXPECT_EQ(m.upper_bound(), 3.0);
  Stream s(2);
  std::vector<double> v(200000);
  for (auto& x : v) {
    x = m.sample(s);
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, 3.0);
  }
  const auto mom = sample_moments(v);
  EXPECT_NEAR(mom.mean, m.mean(), 4.0 * mom.stdev / std::sqrt(v.size()));
}
