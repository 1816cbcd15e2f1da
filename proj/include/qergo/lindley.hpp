#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qergo/empirical.hpp"
#include "qergo/environment.hpp"
#include "qergo/service.hpp"

namespace qergo {

/// (w + s - z)_+.
inline double lindley_step(double w, double s, double z) {
  const double next = w + s - z;
  return next > 0.0 ? next : 0.0;
}

enum class Stability { Subcritical, Critical, Supercritical };

const char* to_string(Stability stability);

struct QueueModel {
  EnvironmentSpec environment;
  ServiceSpec service;

  /// E[S] - E[Z]; negative iff subcritical.
  double drift() const { return service.mean() - environment.mean(); }
  Stability stability() const;
  /// Throws StabilityError naming `what` unless subcritical.
  void require_subcritical(const char* what) const;
};

/// Seeds of the two independent primitive streams of one replica.
struct Seeds {
  std::uint64_t environment = 0;
  std::uint64_t service = 0;
};

Seeds replica_seeds(std::uint64_t master, std::uint64_t replica);

struct Trajectory {
  std::vector<double> waits;  ///< W_0 .. W_n
  Seeds seeds;
  QueueModel model;
  double w0 = 0.0;
};

/// Iterates the Lindley recursion n times from w0 with a stationary environment.
/// Z_0 is drawn first (stationary) and W_{k+1} = (W_k + S_k - Z_{k+1})_+.
Trajectory simulate(const QueueModel& model, double w0, std::size_t n, Seeds seeds);

/// W at the given steps (nondecreasing) along one replica, without storing the path.
std::vector<double> waits_at(const QueueModel& model, double w0, std::span<const std::size_t> steps, Seeds seeds);

/// Bounded step function: levels[0] below breaks[0], levels[i] on [breaks[i-1], breaks[i]), levels.back() above.
class StepFunction {
 public:
  StepFunction(std::vector<double> breaks, std::vector<double> levels);
  /// 1 on the closed set {w >= w0}, 0 elsewhere.
  static StepFunction indicator(double w0) { return StepFunction({w0}, {0.0, 1.0}); }
  static StepFunction constant(double c) { return StepFunction({}, {c}); }

  double operator()(double w) const;

 private:
  std::vector<double> breaks_;
  std::vector<double> levels_;
};

/// (Phi(W_1) + ... + Phi(W_n)) / n.
double functional_average(const Trajectory& trajectory, const StepFunction& phi, std::size_t n);
double functional_average(const Trajectory& trajectory, double w0_threshold, std::size_t n);

/// max(0, sup_{1<=n<=N} sum_{k=1}^n xi_{-k}) for one replica, plus the step of the last running-max increase.
struct LoynesDraw {
  double value = 0.0;
  std::size_t last_increase = 0;
};

/// Draws the backward supremum given a sampler positioned at Z_0; `reversed` must be reversed_spec(model.environment).
LoynesDraw loynes_draw(const QueueModel& model, const EnvironmentSpec& reversed, std::size_t horizon,
                       const EnvSampler& present, Stream& environment_past, Stream& service_past);

struct LoynesResult {
  EmpiricalLaw law;
  /// Fraction of replicas whose running max last increased in the final 10% of the horizon.
  double late_increase_fraction = 0.0;
  bool stabilized = true;  ///< late_increase_fraction < 1%
};

LoynesResult loynes_backward(const QueueModel& model, std::size_t horizon, std::size_t replicas,
                             std::uint64_t seed, unsigned workers = 0);

/// Which event the Borovkov estimator counts.
enum class BorovkovEvent {
  /// W'_1 > 0 and min_{0<k<n} X_k > -W'_1 with W'_1 = (W_0' + xi_0)_+: the stationary copy has not
  /// reached 0 by step n, so it has not coupled with the chain started at 0.
  Coupling,
  /// min_{0<k<n} X_k > max(W_1, W_0' + xi_0), read literally.
  AsPrinted,
};

struct BorovkovOptions {
  std::size_t loynes_horizon = 1000;
  BorovkovEvent event = BorovkovEvent::Coupling;
};

struct ProbabilityEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

ProbabilityEstimate borovkov_rhs(const QueueModel& model, std::size_t n, std::size_t replicas, std::uint64_t seed,
                                 const BorovkovOptions& options = {}, unsigned workers = 0);
/// One estimate per n on shared replicas.
std::vector<ProbabilityEstimate> borovkov_rhs_curve(const QueueModel& model, std::span<const std::size_t> n_grid,
                                                    std::size_t replicas, std::uint64_t seed,
                                                    const BorovkovOptions& options = {}, unsigned workers = 0);

}  // namespace qergo
