#include "qergo/lindley.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qergo/errors.hpp"
#include "qergo/parallel.hpp"

namespace qergo {

const char* to_string(Stability stability) {
  switch (stability) {
    case Stability::Subcritical:
      return "subcritical";
    case Stability::Critical:
      return "critical";
    case Stability::Supercritical:
      return "supercritical";
  }
  return "unknown";
}

Stability QueueModel::stability() const {
  const double d = drift();
  if (d < 0.0) return Stability::Subcritical;
  return d == 0.0 ? Stability::Critical : Stability::Supercritical;
}

void QueueModel::require_subcritical(const char* what) const {
  const auto s = stability();
  if (s == Stability::Subcritical) return;
  std::ostringstream msg;
  msg << what << ": model is " << to_string(s) << " (E[S] = " << service.mean() << ", E[Z] = " << environment.mean()
      << ")";
  throw StabilityError(msg.str());
}

Seeds replica_seeds(std::uint64_t master, std::uint64_t replica) {
  return {derive_seed(master, replica, StreamRole::Environment), derive_seed(master, replica, StreamRole::Service)};
}

Trajectory simulate(const QueueModel& model, double w0, std::size_t n, Seeds seeds) {
  if (n < 1) throw ConfigError("simulate: n must be >= 1");
  if (!std::isfinite(w0) || w0 < 0.0) throw ConfigError("simulate: w0 must be finite and >= 0");
  Stream env_stream(seeds.environment);
  Stream svc_stream(seeds.service);
  EnvSampler env(model.environment);
  env.start_stationary(env_stream);
  Trajectory out{{}, seeds, model, w0};
  out.waits.reserve(n + 1);
  double w = w0;
  out.waits.push_back(w);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = model.service.sample(svc_stream);
    w = lindley_step(w, s, env.next(env_stream));
    out.waits.push_back(w);
  }
  return out;
}

std::vector<double> waits_at(const QueueModel& model, double w0, std::span<const std::size_t> steps, Seeds seeds) {
  Stream env_stream(seeds.environment);
  Stream svc_stream(seeds.service);
  EnvSampler env(model.environment);
  env.start_stationary(env_stream);
  std::vector<double> out;
  out.reserve(steps.size());
  double w = w0;
  std::size_t k = 0;
  for (std::size_t target : steps) {
    if (target < k) throw DomainError("waits_at: steps must be nondecreasing");
    for (; k < target; ++k) {
      const double s = model.service.sample(svc_stream);
      w = lindley_step(w, s, env.next(env_stream));
    }
    out.push_back(w);
  }
  return out;
}

StepFunction::StepFunction(std::vector<double> breaks, std::vector<double> levels)
    : breaks_(std::move(breaks)), levels_(std::move(levels)) {
  if (levels_.size() != breaks_.size() + 1) throw ConfigError("step function needs one more level than breaks");
  for (std::size_t i = 1; i < breaks_.size(); ++i)
    if (!(breaks_[i] > breaks_[i - 1])) throw ConfigError("step function breaks must be strictly increasing");
  for (double l : levels_)
    if (!std::isfinite(l)) throw ConfigError("step function levels must be finite");
}

double StepFunction::operator()(double w) const {
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), w);
  return levels_[static_cast<std::size_t>(it - breaks_.begin())];
}

double functional_average(const Trajectory& trajectory, const StepFunction& phi, std::size_t n) {
  if (n < 1 || n + 1 > trajectory.waits.size()) {
    std::ostringstream msg;
    msg << "functional_average: n = " << n << " outside [1, " << trajectory.waits.size() - 1 << "]";
    throw DomainError(msg.str());
  }
  CompensatedSum sum;
  for (std::size_t k = 1; k <= n; ++k) sum.add(phi(trajectory.waits[k]));
  return sum.value() / static_cast<double>(n);
}

double functional_average(const Trajectory& trajectory, double w0_threshold, std::size_t n) {
  return functional_average(trajectory, StepFunction::indicator(w0_threshold), n);
}

LoynesDraw loynes_draw(const QueueModel& model, const EnvironmentSpec& reversed, std::size_t horizon,
                       const EnvSampler& present, Stream& environment_past, Stream& service_past) {
  // xi_{-k} = S_{-k} - Z_{-k+1}; the reversed chain walks Z_0, Z_{-1}, ...
  EnvSampler past(reversed);
  past.start_from(present);
  LoynesDraw draw;
  double partial = 0.0;
  double z = present.current();
  for (std::size_t k = 1; k <= horizon; ++k) {
    partial += model.service.sample(service_past) - z;
    if (partial > draw.value) {
      draw.value = partial;
      draw.last_increase = k;
    }
    if (k < horizon) z = past.next(environment_past);
  }
  return draw;
}

LoynesResult loynes_backward(const QueueModel& model, std::size_t horizon, std::size_t replicas, std::uint64_t seed,
                             unsigned workers) {
  model.require_subcritical("loynes_backward");
  if (horizon < 1 || replicas < 1) throw ConfigError("loynes_backward: horizon and replicas must be >= 1");
  const auto reversed = reversed_spec(model.environment);
  std::vector<double> values(replicas);
  std::vector<char> late(replicas);
  const std::size_t late_from = horizon - horizon / 10;
  parallel_for(replicas, workers, [&](std::size_t r) {
    Stream env_past(derive_seed(seed, r, StreamRole::EnvironmentPast));
    Stream svc_past(derive_seed(seed, r, StreamRole::ServicePast));
    EnvSampler present(model.environment);
    present.start_stationary(env_past);
    const auto draw = loynes_draw(model, reversed, horizon, present, env_past, svc_past);
    values[r] = draw.value;
    late[r] = draw.last_increase > late_from ? 1 : 0;
  });
  std::size_t late_count = 0;
  for (char l : late) late_count += static_cast<std::size_t>(l);
  const double fraction = static_cast<double>(late_count) / static_cast<double>(replicas);
  return {EmpiricalLaw(std::move(values)), fraction, fraction < 0.01};
}

std::vector<ProbabilityEstimate> borovkov_rhs_curve(const QueueModel& model, std::span<const std::size_t> n_grid,
                                                    std::size_t replicas, std::uint64_t seed,
                                                    const BorovkovOptions& options, unsigned workers) {
  model.require_subcritical("borovkov_rhs");
  if (n_grid.empty()) throw ConfigError("borovkov_rhs: n grid is empty");
  for (std::size_t n : n_grid)
    if (n < 2) throw DomainError("borovkov_rhs: n must be >= 2 (the minimum over 0 < k < n is empty)");
  if (replicas < 100) throw ConfigError("borovkov_rhs: replicas must be >= 100");
  const std::size_t n_max = *std::max_element(n_grid.begin(), n_grid.end());
  const auto reversed = reversed_spec(model.environment);
  // hits[r * grid + g] = 1 if the event for n_grid[g] occurred in replica r.
  std::vector<char> hits(replicas * n_grid.size());
  parallel_for(replicas, workers, [&](std::size_t r) {
    const Seeds seeds = replica_seeds(seed, r);
    Stream env_stream(seeds.environment);
    Stream svc_stream(seeds.service);
    Stream env_past(derive_seed(seed, r, StreamRole::EnvironmentPast));
    Stream svc_past(derive_seed(seed, r, StreamRole::ServicePast));
    EnvSampler env(model.environment);
    env.start_stationary(env_stream);
    const double w0_stationary = loynes_draw(model, reversed, options.loynes_horizon, env, env_past, svc_past).value;
    const double xi0 = model.service.sample(svc_stream) - env.next(env_stream);
    const double w1 = std::max(xi0, 0.0);
    const double shifted = w0_stationary + xi0;
    const double w1_stationary = std::max(shifted, 0.0);
    // min_x[k] = min_{0<j<=k} X_j, filled for k = 1 .. n_max - 1.
    std::vector<double> min_x(n_max, kInfinity);
    double x = 0.0;
    for (std::size_t k = 1; k + 1 <= n_max; ++k) {
      x += model.service.sample(svc_stream) - env.next(env_stream);
      min_x[k] = std::min(min_x[k - 1], x);
    }
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
      const double m = min_x[n_grid[g] - 1];
      const bool hit = options.event == BorovkovEvent::Coupling ? (w1_stationary > 0.0 && m > -w1_stationary)
                                                                : (m > std::max(w1, shifted));
      hits[r * n_grid.size() + g] = hit ? 1 : 0;
    }
  });
  std::vector<ProbabilityEstimate> out;
  out.reserve(n_grid.size());
  const double rd = static_cast<double>(replicas);
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    std::size_t count = 0;
    for (std::size_t r = 0; r < replicas; ++r) count += static_cast<std::size_t>(hits[r * n_grid.size() + g]);
    const double p = static_cast<double>(count) / rd;
    out.push_back({p, std::sqrt(p * (1.0 - p) / rd)});
  }
  return out;
}

ProbabilityEstimate borovkov_rhs(const QueueModel& model, std::size_t n, std::size_t replicas, std::uint64_t seed,
                                 const BorovkovOptions& options, unsigned workers) {
  const std::size_t grid[] = {n};
  return borovkov_rhs_curve(model, grid, replicas, seed, options, workers).front();
}

}  // namespace qergo
