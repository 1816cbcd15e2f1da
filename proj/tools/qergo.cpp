#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qergo/errors.hpp"
#include "qergo/experiments.hpp"

namespace {

int report(const qergo::RunResult& result, const char* kind) {
  if (result.exit_code == qergo::kExitConfig || result.exit_code == qergo::kExitStability ||
      !result.message.empty()) {
    std::cerr << "qergo " << kind << ": " << result.message << '\n';
    return result.exit_code;
  }
  std::cout << kind << ": " << (result.pass ? "PASS" : "FAIL") << " (" << result.out.string() << ")\n";
  for (const auto& f : result.files) std::cout << "  " << (result.out / f).string() << '\n';
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Waiting-time simulation and ergodicity certificates for single-server queues"};
  app.set_version_flag("--version", std::string(qergo::version()));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned workers = 0;
  app.add_option("--config", config_path, "experiment config (TOML, or a manifest.json from an earlier run)");
  app.add_option("--seed", seed, "override the master seed");
  app.add_option("--out", out, "override the output directory");
  app.add_option("--workers", workers, "worker threads (0 = hardware concurrency); results do not depend on it");

  const char* kinds[] = {"simulate", "certify", "tv-decay", "lln", "loynes-compare", "borovkov", "ge-limit"};
  for (const char* kind : kinds) app.add_subcommand(kind, std::string("run a ") + kind + " experiment");
  app.add_subcommand("run", "run whatever experiment the config names");
  app.add_subcommand("validate", "check a config without running it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qergo::kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (config_path.empty()) {
    std::cerr << "qergo " << command << ": --config is required\n";
    return qergo::kExitConfig;
  }

  if (command == "validate") {
    try {
      const auto report = qergo::validate_config_file(config_path);
      if (report.ok()) {
        std::cout << config_path << ": ok\n";
        return qergo::kExitOk;
      }
      for (const auto& v : report.violations) std::cout << config_path << ": " << v << '\n';
      return qergo::kExitConfig;
    } catch (const qergo::Error& e) {
      std::cerr << "qergo validate: " << e.what() << '\n';
      return qergo::kExitConfig;
    }
  }

  qergo::RunOverrides overrides;
  overrides.seed = seed;
  if (!out.empty()) overrides.out = out;
  overrides.workers = workers;

  if (command != "run") {
    // The subcommand must agree with the config's kind.
    try {
      const auto config = qergo::load_config_file(config_path);
      const std::string kind = qergo::to_string(config.experiment.kind);
      if (kind != command) {
        std::cerr << "qergo " << command << ": config describes a '" << kind << "' experiment\n";
        return qergo::kExitConfig;
      }
      return report(qergo::run_experiment(config, overrides), command.c_str());
    } catch (const qergo::ConfigError& e) {
      std::cerr << "qergo " << command << ": " << e.what() << '\n';
      return qergo::kExitConfig;
    }
  }
  return report(qergo::run_config_file(config_path, overrides), "run");
}
