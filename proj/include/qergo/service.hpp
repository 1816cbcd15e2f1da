#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qergo/rng.hpp"

namespace qergo {

/// Which theorem's hypotheses a service law is validated against.
enum class TheoremMode {
  None,
  BoundedEnv,    ///< bounded environment, density bounded away from 0 on compacts
  LightTailEnv,  ///< doubly-exponential environment tail, nonincreasing density f(s) >= C4 e^{-C5 s}
};

const char* to_string(TheoremMode mode);

/// f(s) >= c4 * exp(-c5 * s) for all s >= 0.
struct DensityFloor {
  double c4;
  double c5;
};

namespace service {
struct Degenerate {
  double value;
};
struct Exponential {
  double rate;
};
struct Gamma {
  double shape;
  double rate;
};
/// Uniform on [lo, hi].
struct UniformShifted {
  double lo;
  double hi;
};
struct ExponentialMixture {
  std::vector<double> weights;
  std::vector<double> rates;
};
}  // namespace service

/// Validated i.i.d. service-time law.
class ServiceSpec {
 public:
  using Law = std::variant<service::Degenerate, service::Exponential, service::Gamma, service::UniformShifted,
                           service::ExponentialMixture>;

  /// Throws ConfigError when the parameters are invalid or the law violates `mode`.
  explicit ServiceSpec(Law law, TheoremMode mode = TheoremMode::None);

  static ServiceSpec degenerate(double value, TheoremMode mode = TheoremMode::None) {
    return ServiceSpec(service::Degenerate{value}, mode);
  }
  static ServiceSpec exponential(double rate, TheoremMode mode = TheoremMode::None) {
    return ServiceSpec(service::Exponential{rate}, mode);
  }
  static ServiceSpec gamma(double shape, double rate, TheoremMode mode = TheoremMode::None) {
    return ServiceSpec(service::Gamma{shape, rate}, mode);
  }
  static ServiceSpec uniform_shifted(double lo, double hi, TheoremMode mode = TheoremMode::None) {
    return ServiceSpec(service::UniformShifted{lo, hi}, mode);
  }
  static ServiceSpec exponential_mixture(std::vector<double> weights, std::vector<double> rates,
                                         TheoremMode mode = TheoremMode::None) {
    return ServiceSpec(service::ExponentialMixture{std::move(weights), std::move(rates)}, mode);
  }

  const Law& law() const { return law_; }
  TheoremMode mode() const { return mode_; }
  std::string name() const;

  double mean() const;
  /// Supremum beta0 of the MGF domain; +infinity for bounded laws.
  double beta0() const;
  /// E[e^{beta S}]; throws DomainError if beta >= beta0.
  double mgf(double beta) const;
  double log_mgf(double beta) const;

  bool has_density() const;
  /// f(s); +infinity at s = 0 for Gamma with shape < 1. Throws UnsupportedError without a density.
  double density(double s) const;
  /// True when the density is unbounded at 0 (quadrature near 0 needs an endpoint-robust rule).
  bool density_singular_at_zero() const;
  double cdf(double s) const;
  /// P(lo <= S <= hi), computed without cancellation for far-tail intervals.
  double interval_probability(double lo, double hi) const;
  /// inf of f over [lo, hi]; throws DomainError unless 0 <= lo <= hi < infinity.
  double density_infimum(double lo, double hi) const;
  /// Exponential lower envelope of the density, when one exists.
  const std::optional<DensityFloor>& density_floor() const { return floor_; }
  /// Right edge of the support, +infinity if unbounded.
  double support_upper() const;

  double sample(Stream& stream) const;

 private:
  Law law_;
  TheoremMode mode_;
  std::optional<DensityFloor> floor_;
};

}  // namespace qergo
