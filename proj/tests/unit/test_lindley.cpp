#include <gtest/gtest.h>

#include <cmath>

#include "models.hpp"
#include "qergo/errors.hpp"
#include "qergo/estimate.hpp"

using namespace qergo;
using qergo::testing::deterministic;
using qergo::testing::mm1;

TEST(LindleyStep, Examples) {
  EXPECT_EQ(lindley_step(0, 2, 3), 0.0);
  EXPECT_EQ(lindley_step(1, 2, 1), 2.0);
  EXPECT_EQ(lindley_step(5, 0, 2), 3.0);
}

TEST(QueueModel, Stability) {
  EXPECT_EQ(deterministic(1, 2).stability(), Stability::Subcritical);
  EXPECT_EQ(deterministic(2, 2).stability(), Stability::Critical);
  EXPECT_EQ(deterministic(2, 1).stability(), Stability::Supercritical);
  EXPECT_DOUBLE_EQ(deterministic(0.5, 1).drift(), -0.5);
  EXPECT_DOUBLE_EQ(qergo::testing::bounded_markov().drift(), -1.5);
  EXPECT_THROW(deterministic(2, 1).require_subcritical("x"), StabilityError);
  EXPECT_THROW(deterministic(2, 2).require_subcritical("x"), StabilityError);
}

TEST(Simulate, DeterministicPaths) {
  EXPECT_EQ(simulate(deterministic(1, 2), 0, 5, {1, 2}).waits, std::vector<double>(6, 0.0));
  EXPECT_EQ(simulate(deterministic(2, 1), 0, 3, {1, 2}).waits, (std::vector<double>{0, 1, 2, 3}));
}

TEST(Simulate, StartsAtW0AndStaysNonnegative) {
  const auto t = simulate(mm1(), 3.5, 1000, replica_seeds(4, 0));
  EXPECT_EQ(t.waits.front(), 3.5);
  for (double w : t.waits) EXPECT_GE(w, 0.0);
  EXPECT_THROW(simulate(mm1(), -1.0, 10, {}), ConfigError);
  EXPECT_THROW(simulate(mm1(), 0.0, 0, {}), ConfigError);
}

TEST(Simulate, ReproducibleFromStoredSeeds) {
  const auto a = simulate(qergo::testing::bounded_markov(), 0, 500, replica_seeds(8, 3));
  const auto b = simulate(a.model, a.w0, 500, a.seeds);
  EXPECT_EQ(a.waits, b.waits);
  const std::size_t steps[] = {1, 7, 500};
  const auto at = waits_at(a.model, a.w0, steps, a.seeds);
  EXPECT_EQ(at[0], a.waits[1]);
  EXPECT_EQ(at[1], a.waits[7]);
  EXPECT_EQ(at[2], a.waits[500]);
}

TEST(Simulate, MM1StationaryMean) {
  const auto t = simulate(mm1(), 0, 1000000, replica_seeds(1, 0));
  double sum = 0.0;
  for (std::size_t k = t.waits.size() - 100000; k < t.waits.size(); ++k) sum += t.waits[k];
  EXPECT_NEAR(sum / 100000.0, 0.5, 0.02);
}

TEST(FunctionalAverage, Examples) {
  Trajectory zeros{std::vector<double>(11, 0.0), {}, deterministic(1, 2), 0.0};
  EXPECT_EQ(functional_average(zeros, 0.0, 10), 1.0);
  EXPECT_EQ(functional_average(zeros, 0.1, 10), 0.0);
  const auto t = simulate(mm1(), 0, 1000000, replica_seeds(2, 0));
  EXPECT_NEAR(functional_average(t, 1.0, 1000000), 0.5 * std::exp(-1.0), 0.01);
}

TEST(StepFunction, Levels) {
  const StepFunction f({1.0, 2.0}, {0.0, 5.0, 1.0});
  EXPECT_EQ(f(0.5), 0.0);
  EXPECT_EQ(f(1.0), 5.0);
  EXPECT_EQ(f(1.9), 5.0);
  EXPECT_EQ(f(2.0), 1.0);
  EXPECT_EQ(StepFunction::constant(3.0)(100.0), 3.0);
  EXPECT_THROW(StepFunction({1.0}, {0.0}), ConfigError);
  EXPECT_THROW(StepFunction({2.0, 1.0}, {0.0, 1.0, 2.0}), ConfigError);
}

// Lindley's map is nondecreasing and 1-Lipschitz in the start, for any fixed primitives.
TEST(LindleyProperty, MonotoneAndContractiveInStart) {
  const QueueModel models[] = {mm1(), qergo::testing::bounded_markov(), qergo::testing::light_tail(),
                               {EnvironmentSpec::copula_ar1(0.6, Marginal::exponential(1.0)),
                                ServiceSpec::gamma(0.5, 1.5)}};
  Stream gen(31337);
  for (int pair = 0; pair < 100; ++pair) {
    const auto& model = models[pair % 4];
    const Seeds seeds = replica_seeds(gen.bits(), gen.index(1000));
    double lo = 5.0 * gen.uniform(), hi = 5.0 * gen.uniform();
    if (lo > hi) std::swap(lo, hi);
    const auto a = simulate(model, lo, 200, seeds);
    const auto b = simulate(model, hi, 200, seeds);
    double prev_gap = hi - lo;
    for (std::size_t k = 0; k < a.waits.size(); ++k) {
      const double gap = b.waits[k] - a.waits[k];
      ASSERT_GE(gap, 0.0) << "pair " << pair << " step " << k;
      ASSERT_LE(gap, prev_gap + 1e-12) << "pair " << pair << " step " << k;
      prev_gap = gap;
    }
  }
}

TEST(Loynes, DeterministicNegativeDriftIsPointMassAtZero) {
  const auto r = loynes_backward(deterministic(1, 2), 100, 50, 1);
  EXPECT_EQ(r.law.max(), 0.0);
  EXPECT_EQ(r.law.min(), 0.0);
}

TEST(Loynes, RejectsNonSubcritical) {
  EXPECT_THROW(loynes_backward(deterministic(2, 1), 100, 50, 1), StabilityError);
}

TEST(Loynes, MM1Tail) {
  const auto r = loynes_backward(mm1(), 1000, 100000, 6);
  EXPECT_NEAR(r.law.tail(1.0), 0.5 * std::exp(-1.0), 0.01);
  EXPECT_NEAR(r.law.mean(), 0.5, 0.02);
  EXPECT_TRUE(r.stabilized);
}

TEST(Loynes, ShortHorizonIsFlagged) {
  const auto r = loynes_backward(
      {EnvironmentSpec::iid(Marginal::exponential(1.0)), ServiceSpec::exponential(1.05)}, 20, 2000, 6);
  EXPECT_FALSE(r.stabilized);
  EXPECT_GE(r.late_increase_fraction, 0.01);
}

TEST(Loynes, MarkovMatchesLongForwardRun) {
  const auto model = qergo::testing::bounded_markov(TheoremMode::None);
  const auto back = loynes_backward(model, 2000, 20000, 12);
  std::vector<double> fw(20000);
  const std::size_t step[] = {3000};
  for (std::size_t r = 0; r < fw.size(); ++r) fw[r] = waits_at(model, 0, step, replica_seeds(13, r))[0];
  // two-sample KS at 2e4 each: 99.9% point is about 0.0195
  EXPECT_LT(ks_distance(back.law, EmpiricalLaw(fw)), 0.0195);
}

TEST(Borovkov, DeterministicAndPrecondition) {
  const std::size_t grid[] = {2, 5, 10};
  for (const auto& p : borovkov_rhs_curve(deterministic(1, 2), grid, 200, 1)) EXPECT_EQ(p.estimate, 0.0);
  BorovkovOptions printed;
  printed.event = BorovkovEvent::AsPrinted;
  EXPECT_EQ(borovkov_rhs(deterministic(1, 2), 5, 200, 1, printed).estimate, 0.0);
  EXPECT_THROW(borovkov_rhs(deterministic(2, 1), 5, 200, 1), StabilityError);
  EXPECT_THROW(borovkov_rhs(mm1(), 1, 200, 1), DomainError);
  EXPECT_THROW(borovkov_rhs(mm1(), 5, 10, 1), ConfigError);
}

TEST(Borovkov, CurveNonincreasingAndMatchesPointwise) {
  const std::size_t grid[] = {2, 5, 10, 20};
  const auto curve = borovkov_rhs_curve(mm1(), grid, 20000, 5);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i].estimate, curve[i - 1].estimate);
  EXPECT_EQ(borovkov_rhs(mm1(), 10, 20000, 5).estimate, curve[2].estimate);
}

TEST(Borovkov, AsPrintedEventIsSmaller) {
  BorovkovOptions printed;
  printed.event = BorovkovEvent::AsPrinted;
  const auto coupling = borovkov_rhs(mm1(), 10, 50000, 8);
  const auto literal = borovkov_rhs(mm1(), 10, 50000, 8, printed);
  EXPECT_LE(literal.estimate, coupling.estimate);
}

TEST(Borovkov, BoundsNoiseCorrectedTvAtFifty) {
  const std::size_t grid[] = {50};
  BorovkovCompareOptions options;
  options.tv.reference = ReferenceKind::Loynes;
  const auto table = borovkov_compare(mm1(), grid, 100000, 21, options);
  const auto& row = table.rows.front();
  const double combined = std::hypot(row.tv_std_error, 2.0 * row.rhs_std_error);
  EXPECT_GE(2.0 * row.rhs, row.tv - table.noise_floor - 2.0 * combined);
}
