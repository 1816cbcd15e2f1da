#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qergo/experiments.hpp"

using namespace qergo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qergo_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kSimulate = R"(
[environment]
family = "iid"
marginal = { law = "exponential", rate = 1.0 }

[service]
family = "exponential"
rate = 2.0

[experiment]
kind = "simulate"
seed = 3
horizon = 500
replicas = 50
)";

}  // namespace

TEST(RunExperiment, CertifyMM1) {
  auto config = load_config_text(R"(
[environment]
family = "iid"
marginal = { law = "exponential", rate = 1.0 }
[service]
family = "exponential"
rate = 2.0
[experiment]
kind = "certify"
seed = 1
z_points = 10
w_points = 10
)");
  const auto out = scratch("certify");
  const auto r = run_experiment(config, {.out = out});
  ASSERT_EQ(r.exit_code, kExitOk) << r.message;
  const auto cert = nlohmann::json::parse(slurp(out / "certificate.json"));
  EXPECT_NEAR(cert["gamma_bar"].get<double>(), 8.0 / 9.0, 1e-9);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["config"]["experiment"]["seed"], 1);
  EXPECT_EQ(manifest["version"], version());
  EXPECT_TRUE(manifest.contains("wall_clock_seconds"));
}

TEST(RunExperiment, SupercriticalSimulateExitsThree) {
  auto config = load_config_text(R"(
[environment]
family = "iid"
marginal = { law = "degenerate", value = 1.0 }
[service]
family = "degenerate"
value = 2.0
[experiment]
kind = "simulate"
seed = 1
)");
  const auto r = run_experiment(config, {.out = scratch("super")});
  EXPECT_EQ(r.exit_code, kExitStability);
  EXPECT_NE(r.message.find("supercritical"), std::string::npos);
}

TEST(RunExperiment, RerunIsByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  const auto ra = run_experiment(load_config_text(kSimulate), {.out = a, .workers = 1});
  const auto rb = run_experiment(load_config_text(kSimulate), {.out = b, .workers = 4});
  ASSERT_EQ(ra.exit_code, kExitOk);
  ASSERT_EQ(rb.exit_code, kExitOk);
  for (const char* f : {"trajectory.csv", "final_waits.csv", "summary.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(slurp(a / "trajectory.csv").substr(0, 10), "step,wait\n");
}

TEST(RunExperiment, ManifestReproducesOutputs) {
  const auto a = scratch("manifest_a"), b = scratch("manifest_b");
  ASSERT_EQ(run_experiment(load_config_text(kSimulate), {.seed = 99, .out = a}).exit_code, kExitOk);
  const auto r = run_config_file((a / "manifest.json").string(), {.out = b});
  ASSERT_EQ(r.exit_code, kExitOk) << r.message;
  EXPECT_EQ(slurp(a / "trajectory.csv"), slurp(b / "trajectory.csv"));
  const auto manifest = nlohmann::json::parse(slurp(b / "manifest.json"));
  EXPECT_EQ(manifest["seeds"]["master"], 99);
}

TEST(RunExperiment, ConfigErrorsExitTwo) {
  EXPECT_EQ(run_config_file("/nonexistent.toml").exit_code, kExitConfig);
  const auto dir = scratch("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.toml") << "[experiment]\nkind = \"simulate\"\n";
  const auto r = run_config_file((dir / "bad.toml").string());
  EXPECT_EQ(r.exit_code, kExitConfig);
  EXPECT_NE(r.message.find("experiment.seed"), std::string::npos);
}

TEST(RunExperiment, GeLimitWritesTable) {
  auto config = load_config_text(R"(
[environment]
family = "markov_modulated"
states = [1.0, 3.0]
transition = [[0.5, 0.5], [0.5, 0.5]]
[service]
family = "exponential"
rate = 2.0
[experiment]
kind = "ge-limit"
seed = 4
replicas = 20000
)");
  const auto out = scratch("ge");
  const auto r = run_experiment(config, {.out = out});
  EXPECT_EQ(r.exit_code, kExitOk) << r.summary.dump();
  EXPECT_EQ(slurp(out / "ge_limit.csv").substr(0, 22), "alpha,exact,mc,stderr\n");
}
