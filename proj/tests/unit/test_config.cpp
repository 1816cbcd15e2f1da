#include <gtest/gtest.h>

#include <algorithm>

#include "qergo/config.hpp"
#include "qergo/errors.hpp"

using namespace qergo;

namespace {

const char* kMm1 = R"(
[environment]
family = "iid"
marginal = { law = "exponential", rate = 1.0 }

[service]
family = "exponential"
rate = 2.0

[experiment]
kind = "certify"
seed = 1
)";

bool mentions(const ValidationReport& r, const std::string& needle) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return text.replace(at, from.size(), to);
}

}  // namespace

TEST(Config, ValidDemoHasEmptyReport) {
  EXPECT_TRUE(validate_config_text(kMm1).ok());
  const auto c = load_config_text(kMm1);
  EXPECT_EQ(c.experiment.kind, ExperimentKind::Certify);
  EXPECT_EQ(c.experiment.seed, 1u);
  EXPECT_EQ(c.model.service.mean(), 0.5);
  EXPECT_EQ(c.model.environment.mean(), 1.0);
}

TEST(Config, MissingSeedIsListed) {
  const auto r = validate_config_text(replace(kMm1, "seed = 1\n", ""));
  EXPECT_TRUE(mentions(r, "experiment.seed: missing"));
}

TEST(Config, NonStochasticRowIsListed) {
  const std::string text = replace(kMm1, R"(family = "iid"
marginal = { law = "exponential", rate = 1.0 })",
                                   R"(family = "markov_modulated"
states = [1.0, 3.0]
transition = [[0.5, 0.6], [0.5, 0.5]])");
  const auto r = validate_config_text(text);
  EXPECT_TRUE(mentions(r, "non-stochastic")) << r.violations.size();
}

TEST(Config, EveryViolationListed) {
  std::string text = replace(kMm1, "rate = 2.0", "rate = -2.0\ncolour = \"red\"");
  text = replace(text, "seed = 1", "seed = -4\nhorizon = 10\nbogus = 1");
  text = replace(text, "rate = 1.0 }", "rate = 1.0, shape = 2 }");
  const auto r = validate_config_text(text);
  EXPECT_TRUE(mentions(r, "service.colour: unknown key"));
  EXPECT_TRUE(mentions(r, "service: exponential service: rate must be > 0"));
  EXPECT_TRUE(mentions(r, "experiment.seed: must be >= 0"));
  EXPECT_TRUE(mentions(r, "experiment.horizon: not used by kind 'certify'"));
  EXPECT_TRUE(mentions(r, "experiment.bogus: unknown key"));
  EXPECT_TRUE(mentions(r, "environment.marginal.shape: unknown key"));
  EXPECT_GE(r.violations.size(), 6u);
  EXPECT_THROW(load_config_text(text), ConfigError);
}

TEST(Config, TypeErrors) {
  const auto r = validate_config_text(replace(kMm1, "seed = 1", "seed = 1.5\ntheta = \"half\""));
  EXPECT_TRUE(mentions(r, "experiment.seed: must be an integer"));
  EXPECT_TRUE(mentions(r, "experiment.theta: must be a number"));
}

TEST(Config, UnparsableTextThrows) {
  EXPECT_THROW(validate_config_text("[environment\nfamily = "), ConfigError);
  EXPECT_THROW(validate_config_file("/nonexistent/qergo.toml"), ConfigError);
}

TEST(Config, KindDefaults) {
  const auto c = load_config_text(replace(kMm1, "kind = \"certify\"", "kind = \"tv-decay\""));
  EXPECT_EQ(c.experiment.n_grid, (std::vector<std::size_t>{1, 2, 5, 10, 20, 50}));
  EXPECT_EQ(c.experiment.replicas, 100000u);
  ASSERT_TRUE(c.experiment.fit_exponent.has_value());
  EXPECT_NEAR(*c.experiment.fit_exponent, 1.0 / 3.0, 1e-15);
  const auto free = load_config_text(
      replace(kMm1, "kind = \"certify\"", "kind = \"tv-decay\"\nfit_exponent = \"free\"\nreplicas = 2000"));
  EXPECT_FALSE(free.experiment.fit_exponent.has_value());
  EXPECT_FALSE(validate_config_text(replace(kMm1, "kind = \"certify\"", "kind = \"tv-decay\"\nreplicas = 10")).ok());
}

TEST(Config, ResolvedSettingsRoundTrip) {
  const std::string markov = replace(R"(
[environment]
family = "markov_modulated"
states = [1.0, 3.0]
transition = [[0.9, 0.1], [0.1, 0.9]]

[service]
family = "exponential_mixture"
weights = [0.25, 0.75]
rates = [1.0, 4.0]
theorem_mode = "light_tail_env"

[experiment]
kind = "borovkov"
seed = 18446744073709551615
)", "seed = 18446744073709551615", "seed = \"18446744073709551615\"");
  const auto a = load_config_text(markov);
  EXPECT_EQ(a.experiment.seed, 18446744073709551615ull);
  const auto b = load_config_json(a.resolved);
  EXPECT_TRUE(b.model.environment == a.model.environment);
  EXPECT_EQ(b.resolved, a.resolved);
  EXPECT_EQ(b.experiment.n_grid, a.experiment.n_grid);
  EXPECT_EQ(b.experiment.seed, a.experiment.seed);
  EXPECT_EQ(to_json(b.model.service)["family"], "exponential_mixture");
  EXPECT_EQ(to_json(b.model.environment)["stationary"][0], 0.5);
}

TEST(Config, ParseExperimentKind) {
  for (auto k : {ExperimentKind::Simulate, ExperimentKind::Certify, ExperimentKind::TvDecay, ExperimentKind::Lln,
                 ExperimentKind::LoynesCompare, ExperimentKind::Borovkov, ExperimentKind::GeLimit})
    EXPECT_EQ(parse_experiment_kind(to_string(k)), k);
  EXPECT_FALSE(parse_experiment_kind("nope").has_value());
}
