#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qergo/marginal.hpp"
#include "qergo/rng.hpp"

namespace qergo {

enum class EnvironmentFamily { IID, MarkovModulated, CopulaAR1 };

const char* to_string(EnvironmentFamily family);

/// A validated description of a stationary ergodic inter-arrival process (Z_n).
///
/// Immutable once constructed; all factories throw ConfigError on invalid input.
class EnvironmentSpec {
 public:
  static EnvironmentSpec iid(Marginal marginal);
  /// Z_n = states[X_n] for a finite Markov chain X with row-stochastic `transition`.
  static EnvironmentSpec markov_modulated(std::vector<double> states, Eigen::MatrixXd transition);
  /// Z_n = F^{-1}(Phi(G_n)) with G a unit-variance Gaussian AR(1) of coefficient `ar_coefficient`.
  static EnvironmentSpec copula_ar1(double ar_coefficient, Marginal marginal);

  EnvironmentFamily family() const { return family_; }
  /// Marginal law for IID and CopulaAR1; throws UnsupportedError for MarkovModulated.
  const Marginal& marginal() const;
  const std::vector<double>& states() const { return states_; }
  const Eigen::MatrixXd& transition() const { return transition_; }
  /// Stationary vector pi of the modulating chain (empty unless MarkovModulated).
  const Eigen::VectorXd& stationary() const { return stationary_; }
  double ar_coefficient() const { return ar_coefficient_; }

  /// Almost-sure bound M on Z_0, +infinity if unbounded.
  double bound() const;
  double mean() const;
  /// Doubly-exponential tail constants of the marginal, when it has one.
  std::optional<DoublyExponentialTail> doubly_exponential_tail() const;

  bool operator==(const EnvironmentSpec& other) const;

 private:
  EnvironmentSpec() = default;

  EnvironmentFamily family_ = EnvironmentFamily::IID;
  std::optional<Marginal> marginal_;
  std::vector<double> states_;
  Eigen::MatrixXd transition_;
  Eigen::VectorXd stationary_;
  double ar_coefficient_ = 0.0;
};

/// Stationary vector of a row-stochastic irreducible matrix; ConfigError if not unique.
Eigen::VectorXd stationary_vector(const Eigen::MatrixXd& transition);

/// Spec of the time-reversed stationary process. MarkovModulated uses P*_ij = pi_j P_ji / pi_i.
EnvironmentSpec reversed_spec(const EnvironmentSpec& spec);

/// Sequential sampler over one environment realization.
class EnvSampler {
 public:
  explicit EnvSampler(const EnvironmentSpec& spec) : spec_(&spec) {}

  /// Draws Z_0 from the stationary law and returns it.
  double start_stationary(Stream& stream);
  /// Starts at the same hidden state as `other` (used to glue a reversed past onto a forward future).
  void start_from(const EnvSampler& other);
  double current() const { return value_; }
  /// Advances one step and returns the new value.
  double next(Stream& stream);

 private:
  double emit();

  const EnvironmentSpec* spec_;
  std::size_t state_ = 0;
  double latent_ = 0.0;
  double value_ = 0.0;
};

struct EnvPath {
  std::vector<double> values;
  std::uint64_t seed = 0;
  EnvironmentSpec spec;
};

/// n stationary draws Z_1..Z_n, a pure function of (spec, n, seed).
EnvPath sample_path(const EnvironmentSpec& spec, std::size_t n, std::uint64_t seed);

/// M(alpha)_ij = P_ij exp(alpha z_j).
Eigen::MatrixXd tilted_matrix(const EnvironmentSpec& spec, double alpha);

/// ln of the Perron root of `matrix` diag(exp(alpha z)); stable for large |alpha z|.
double log_perron_root(const Eigen::MatrixXd& transition, const std::vector<double>& states, double alpha);
/// Perron root of a nonnegative primitive matrix by power iteration (dense fallback).
double perron_root(const Eigen::MatrixXd& matrix);
/// Perron root from a full dense eigen-decomposition.
double perron_root_dense(const Eigen::MatrixXd& matrix);

/// Gamma(alpha) = lim (1/n) ln E exp(alpha (Z_1 + ... + Z_n)).
double exact_cgf_limit(const EnvironmentSpec& spec, double alpha);

struct CgfEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// alpha-free part of the Monte Carlo cumulant estimate: Z_1 + ... + Z_n for each replica.
std::vector<double> replica_sums(const EnvironmentSpec& spec, std::size_t n, std::size_t replicas, std::uint64_t seed,
                                 unsigned workers = 0);
/// (1/n) ln mean(exp(alpha * sums)) with the maximum exponent factored out.
CgfEstimate log_mean_exp_cgf(std::span<const double> sums, double alpha, std::size_t n);

/// Finite-n Monte Carlo proxy (1/n) ln mean(exp(alpha sum Z)) with a delta-method stderr.
CgfEstimate mc_cgf_estimate(const EnvironmentSpec& spec, double alpha, std::size_t n, std::size_t replicas,
                            std::uint64_t seed, unsigned workers = 0);

}  // namespace qergo
