#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qergo/certify.hpp"
#include "qergo/estimate.hpp"

namespace qergo {

enum class ExperimentKind { Simulate, Certify, TvDecay, Lln, LoynesCompare, Borovkov, GeLimit };

const char* to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment_kind(std::string_view name);

/// The [experiment] table after defaults for the chosen kind are filled in.
struct ExperimentSettings {
  ExperimentKind kind = ExperimentKind::Simulate;
  std::uint64_t seed = 0;
  std::string output = "out";

  // shared
  std::size_t horizon = 1000;
  std::size_t replicas = 1;
  std::vector<std::size_t> n_grid;
  double w0 = 0.0;
  double threshold = 1.0;
  std::size_t n_star = 0;
  ReferenceKind reference = ReferenceKind::Forward;
  std::size_t reference_replicas = 100000;
  std::size_t loynes_horizon = 1000;
  std::size_t bootstrap = 100;
  double tolerance = 0.0;

  // tv-decay
  std::optional<double> fit_exponent = 1.0 / 3.0;  ///< unset means free
  double min_r_squared = 0.9;

  // borovkov
  BorovkovEvent event = BorovkovEvent::Coupling;

  // certify
  std::optional<double> theta;
  std::optional<AlphaMode> alpha_mode;
  std::optional<double> H;
  double grid_step = 0.01;
  double beta_cap = 10.0;
  double precision = 1e-8;
  std::size_t z_points = 100;
  std::size_t w_points = 100;
  std::optional<double> z_max;
  std::optional<double> w_max;
  std::size_t partitions = 32;
  std::size_t z_samples = 50;
  std::size_t minorization_w_points = 50;
  std::size_t alpha_samples = 100000;
  std::size_t mc_n = 200;
  std::size_t mc_replicas = 20000;

  // ge-limit
  std::vector<double> alphas;
  std::size_t n = 10;
};

struct ExperimentConfig {
  QueueModel model;
  ExperimentSettings experiment;
  /// Every setting after defaults, in config-file layout.
  nlohmann::json resolved;
};

/// Empty when the configuration is valid.
struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Validates without running. Throws ConfigError if the text is not parsable TOML.
ValidationReport validate_config_text(std::string_view text);
/// Throws ConfigError if the file cannot be read or parsed.
ValidationReport validate_config_file(const std::string& path);

/// Throws ConfigError listing every violation.
ExperimentConfig load_config_text(std::string_view text);
ExperimentConfig load_config_file(const std::string& path);

/// Resolved settings (the `resolved` member, or a manifest's "config") back to TOML text.
std::string to_toml(const nlohmann::json& resolved);
ExperimentConfig load_config_json(const nlohmann::json& resolved);

nlohmann::json to_json(const EnvironmentSpec& env);
nlohmann::json to_json(const ServiceSpec& service);

}  // namespace qergo
