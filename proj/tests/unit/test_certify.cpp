#include <gtest/gtest.h>

#include <cmath>

#include "models.hpp"
#include "qergo/certify.hpp"
#include "qergo/errors.hpp"

using namespace qergo;
using qergo::testing::deterministic;
using qergo::testing::mm1;

namespace {

CertificationError::Reason reason_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const CertificationError& e) {
    return e.reason();
  }
  ADD_FAILURE() << "no CertificationError thrown";
  return CertificationError::Reason::GridResolution;
}

}  // namespace

TEST(Lambda, ClosedFormsForMM1) {
  EXPECT_EQ(lambda_fn(mm1(), 0.0), 0.0);
  EXPECT_NEAR(lambda_fn(mm1(), 0.5), -std::log(1.5) + std::log(4.0 / 3.0), 1e-15);
  EXPECT_NEAR(lambda_fn(mm1(), 1.0), 0.0, 1e-15);
  EXPECT_NEAR(lambda_fn(mm1(), 0.5), -0.117783, 1e-6);
}

TEST(Lambda, SlopeAtZero) {
  EXPECT_DOUBLE_EQ(lambda_slope_at_zero(deterministic(0.5, 1.0)), -0.5);
  EXPECT_DOUBLE_EQ(lambda_slope_at_zero(deterministic(1.0, 1.0)), 0.0);
  EXPECT_DOUBLE_EQ(lambda_slope_at_zero(qergo::testing::bounded_markov()), -1.5);
  // numerical derivative agrees
  const double h = 1e-6;
  EXPECT_NEAR(lambda_fn(mm1(), h) / h, lambda_slope_at_zero(mm1()), 1e-5);
}

TEST(Lambda, MonteCarloAgreesWithExact) {
  // i.i.d. uniform chain on {1, 3}: the finite-n cumulant equals its limit
  const QueueModel model{
      EnvironmentSpec::markov_modulated({1.0, 3.0}, qergo::testing::matrix2(0.5, 0.5, 0.5, 0.5)),
      ServiceSpec::exponential(2.0)};
  MonteCarloCgf mc{10, 100000, 3};
  const auto v = lambda_fn_mc(model, 0.5, mc);
  EXPECT_FALSE(v.exact);
  EXPECT_NEAR(v.value, lambda_fn(model, 0.5), 3.0 * v.std_error);
}

TEST(BetaBar, MM1) {
  const auto b = find_beta_bar(mm1());
  EXPECT_NEAR(b.beta_bar, 0.5, b.step);
  EXPECT_NEAR(b.lambda, -0.117783, 1e-6);
  EXPECT_NEAR(b.upper, 1.8, 1e-12);
  EXPECT_TRUE(b.exact);
}

TEST(BetaBar, LinearLambdaHitsRightEdge) {
  const auto b = find_beta_bar(deterministic(1, 2));
  EXPECT_NEAR(b.beta_bar, b.upper, 1e-12);
  EXPECT_NEAR(b.lambda, -b.beta_bar, 1e-12);
}

TEST(BetaBar, RefusesNonSubcritical) {
  EXPECT_EQ(reason_of([] { find_beta_bar(deterministic(2, 1)); }), CertificationError::Reason::Supercritical);
  EXPECT_EQ(reason_of([] { find_beta_bar(deterministic(1, 1)); }), CertificationError::Reason::Critical);
}

TEST(BetaBar, CoarseGridReportsResolution) {
  // lambda is negative only on (0, 1e-3): any grid with step 0.01 misses it
  const QueueModel barely{EnvironmentSpec::iid(Marginal::exponential(1.0)), ServiceSpec::exponential(1.001)};
  EXPECT_EQ(reason_of([&] { find_beta_bar(barely); }), CertificationError::Reason::GridResolution);
}

TEST(GammaK, Values) {
  DriftCertificate c;
  c.beta_bar = 0.5;
  c.mS = 4.0 / 3.0;
  EXPECT_DOUBLE_EQ(gamma_K(0.0, c), 4.0 / 3.0);
  EXPECT_NEAR(gamma_K(2.0 * std::log(4.0 / 3.0), c), 1.0, 1e-15);
  EXPECT_NEAR(2.0 * std::log(4.0 / 3.0), 0.575364, 1e-6);
  double prev = gamma_K(0.0, c);
  for (int i = 1; i < 100; ++i) {
    const double v = gamma_K(0.5 * i, c);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(GammaBar, Examples) {
  const auto mm = contractivity_gamma_bar(mm1().environment, 0.5, 4.0 / 3.0, GammaMethod::Exact);
  EXPECT_NEAR(mm.value, 8.0 / 9.0, 1e-15);
  const auto det = contractivity_gamma_bar(EnvironmentSpec::iid(Marginal::degenerate(2.0)), 1.0, std::exp(1.0),
                                           GammaMethod::Exact);
  EXPECT_NEAR(det.value, std::exp(-1.0), 1e-15);
}

TEST(GammaBar, ConsistentWithLambda) {
  for (const auto& model : {mm1(), qergo::testing::bounded_markov()}) {
    const auto b = find_beta_bar(model);
    const double mS = model.service.mgf(b.beta_bar);
    const auto g = contractivity_gamma_bar(model.environment, b.beta_bar, mS, GammaMethod::Exact);
    EXPECT_NEAR(std::log(g.value), b.lambda, 1e-9);
  }
}

TEST(SmallSet, Arithmetic) {
  const auto s = small_set_parameters(0.25, 1.0);
  EXPECT_DOUBLE_EQ(s.epsilon, 0.5);
  EXPECT_DOUBLE_EQ(s.R, 4.0);
  EXPECT_NEAR(s.h, std::log(5.0), 1e-15);
  EXPECT_THROW(small_set_parameters(1.0, 1.0), DomainError);
  EXPECT_THROW(small_set_parameters(0.5, 0.0), DomainError);
}

TEST(Certificate, MM1UnboundedMode) {
  CertifyOptions options;
  options.theta = 0.5;
  const auto c = build_certificate(mm1(), options);
  EXPECT_EQ(c.alpha_mode, AlphaMode::ExponentialUnbounded);
  EXPECT_EQ(c.C4, 2.0);
  EXPECT_EQ(c.C5, 2.0);
  EXPECT_NEAR(c.gamma_bar, 8.0 / 9.0, 1e-12);
  EXPECT_NEAR(c.alpha(0.0), 1.0 - 2.0 * std::exp(-2.0 * (c.h + 1.0)), 1e-15);
  EXPECT_NEAR(c.kappa_exp, 1.0 / 1.5, 1e-15);
  EXPECT_NEAR(std::expm1(c.beta_bar * c.h), c.R, 1e-9);
  EXPECT_TRUE(verify_self_consistency(c).pass);
}

TEST(Certificate, BoundedMarkov) {
  const auto c = build_certificate(qergo::testing::bounded_markov());
  EXPECT_EQ(c.alpha_mode, AlphaMode::ConstantBounded);
  EXPECT_EQ(c.env_bound, 3.0);
  EXPECT_NEAR(c.alpha_const, 1.0 - 2.0 * std::exp(-2.0 * (3.0 + c.h + 1.0)), 1e-15);
  EXPECT_NEAR(std::log(c.gamma_bar), c.lambda_at_beta_bar, 1e-9);
  EXPECT_TRUE(verify_self_consistency(c).pass);
}

TEST(Certificate, Refusals) {
  EXPECT_THROW(build_certificate(deterministic(2, 1)), StabilityError);
  EXPECT_THROW(build_certificate(deterministic(1, 1)), StabilityError);
  const QueueModel uniform_bounded{EnvironmentSpec::iid(Marginal::uniform(0.5, 2.0)),
                                   ServiceSpec::uniform_shifted(0.0, 1.0, TheoremMode::BoundedEnv)};
  EXPECT_EQ(reason_of([&] { build_certificate(uniform_bounded); }),
            CertificationError::Reason::MinorizationUnobtainable);
  const QueueModel no_floor{EnvironmentSpec::iid(Marginal::exponential(1.0)), ServiceSpec::gamma(2.0, 4.0)};
  EXPECT_EQ(reason_of([&] { build_certificate(no_floor); }), CertificationError::Reason::MissingDensityFloor);
  CertifyOptions bad;
  bad.theta = 1.0;
  EXPECT_THROW(build_certificate(mm1(), bad), ConfigError);
}

TEST(Certificate, ThetaSelectionForLightTailDemo) {
  const auto c = build_certificate(qergo::testing::light_tail());
  EXPECT_TRUE(c.theta_selected);
  EXPECT_LT(c.theta, std::min(1.0 - c.C5 * c.H, 4.0 * c.H));
  EXPECT_NEAR(c.H, 0.25, 0.0);
}

TEST(AlphaMoment, ConstantModeClosedForm) {
  DriftCertificate c;
  c.alpha_mode = AlphaMode::ConstantBounded;
  c.alpha_const = 0.5;
  const double n_list[] = {4.0, 100.0};
  const auto curve = alpha_moment_curve(c, mm1().environment, 0.5, n_list);
  EXPECT_NEAR(curve[0].value, 0.25, 1e-15);
  EXPECT_NEAR(curve[1].value, std::pow(0.5, 10.0), 1e-18);
  EXPECT_EQ(curve[0].std_error, 0.0);
}

TEST(AlphaMoment, NonincreasingDetector) {
  std::vector<AlphaMomentPoint> curve(4);
  const double values[] = {0.9, 0.8, 0.85, 0.1};
  for (int i = 0; i < 4; ++i) {
    curve[i].n = 5.0 * (i + 1);
    curve[i].value = values[i];
  }
  EXPECT_FALSE(nonincreasing_after(curve, 10.0));
  curve[2].std_error = 0.05;
  EXPECT_TRUE(nonincreasing_after(curve, 10.0));
  EXPECT_TRUE(nonincreasing_after(curve, 15.0));
}

TEST(Drift, ZeroDepartureNodeHasClosedFormLhs) {
  const auto c = build_certificate(mm1(), {.theta = 0.5});
  const auto& s = mm1().service;
  for (double w : {0.0, 1.0, 5.0}) {
    // z = 0: (w + S)_+ = w + S, so LHS = mS e^{beta w} - 1
    const auto q = drift_lhs(c, s, 0.0, w, 1e-10);
    EXPECT_NEAR(q.value, c.mS * std::exp(c.beta_bar * w) - 1.0, 1e-9 * std::exp(c.beta_bar * w));
  }
}

TEST(Drift, QuadratureAgreesWithMonteCarlo) {
  const auto c = build_certificate(mm1(), {.theta = 0.5});
  const auto& s = mm1().service;
  const double z = 1.0, w = 1.0;
  const auto q = drift_lhs(c, s, z, w, 1e-10);
  // closed form: E e^{beta (S - 0)_+} - 1 with S ~ Exp(2), beta = 0.5 (w - z = 0)
  EXPECT_NEAR(q.value, 4.0 / 3.0 - 1.0, 1e-9);
  Stream st(4);
  const int n = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = std::expm1(c.beta_bar * lindley_step(w, s.sample(st), z));
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_NEAR(q.value, mean, 3.0 * se);
}

TEST(Drift, SmallGridPasses) {
  const auto c = build_certificate(mm1(), {.theta = 0.5});
  std::vector<double> z, w;
  for (int i = 0; i < 12; ++i) z.push_back(i * 1.0);
  for (int i = 0; i < 12; ++i) w.push_back(i * 3.0);
  const auto r = verify_drift(c, mm1().service, z, w, 1e-8);
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.worst_margin, -1e-8);
  EXPECT_EQ(r.nodes, 144u);
}

TEST(Minorization, ExponentialServiceAtZero) {
  const auto c = build_certificate(mm1(), {.theta = 0.5});
  // Q over A = [h, h+1] from w = h, z = 0 is P(S in [0, 1])
  EXPECT_NEAR(mm1().service.interval_probability(0.0, 1.0), 1.0 - std::exp(-2.0), 1e-15);
  EXPECT_GT(1.0 - std::exp(-2.0), (1.0 - c.alpha(0.0)) * 1.0);
  const double z[] = {0.0, 0.5, 2.0};
  EXPECT_TRUE(verify_minorization(c, mm1().service, z, 32, 50).pass);
}

TEST(Minorization, TruncatedArrivalsConstantMode) {
  const QueueModel model{EnvironmentSpec::iid(Marginal::truncated_exponential(1.0, 3.0)),
                         ServiceSpec::exponential(2.0, TheoremMode::BoundedEnv)};
  const auto c = build_certificate(model);
  const double z[] = {0.0, 1.0, 2.9};
  const auto r = verify_minorization(c, model.service, z, 32, 50);
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.worst_margin, 0.0);
}
