#include "qergo/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include "qergo/errors.hpp"
#include "qergo/parallel.hpp"

namespace qergo {

namespace {

constexpr double kRowTolerance = 1e-12;
constexpr double kPerronTolerance = 1e-12;
constexpr int kPerronIterations = 100000;

std::vector<int> bfs_levels(const Eigen::MatrixXd& adjacency, bool transpose) {
  const auto n = adjacency.rows();
  std::vector<int> level(n, -1);
  std::queue<Eigen::Index> pending;
  level[0] = 0;
  pending.push(0);
  while (!pending.empty()) {
    const auto u = pending.front();
    pending.pop();
    for (Eigen::Index v = 0; v < n; ++v) {
      const double w = transpose ? adjacency(v, u) : adjacency(u, v);
      if (w > 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        pending.push(v);
      }
    }
  }
  return level;
}

void validate_chain(const std::vector<double>& states, const Eigen::MatrixXd& p) {
  const auto n = static_cast<Eigen::Index>(states.size());
  if (n == 0) throw ConfigError("markov_modulated: at least one state is required");
  if (p.rows() != n || p.cols() != n) {
    std::ostringstream msg;
    msg << "markov_modulated: transition must be " << n << "x" << n << " to match states";
    throw ConfigError(msg.str());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(states[i]) || states[i] < 0.0)
      throw ConfigError("markov_modulated: state values must be finite and >= 0");
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(p(i, j)) || p(i, j) < 0.0)
        throw ConfigError("markov_modulated: transition entries must be finite and >= 0");
      row += p(i, j);
    }
    if (std::abs(row - 1.0) > kRowTolerance) {
      std::ostringstream msg;
      msg << "markov_modulated: transition row " << i << " sums to " << row << ", not 1";
      throw ConfigError(msg.str());
    }
  }
  const auto forward = bfs_levels(p, false);
  const auto backward = bfs_levels(p, true);
  const bool connected = std::all_of(forward.begin(), forward.end(), [](int l) { return l >= 0; }) &&
                         std::all_of(backward.begin(), backward.end(), [](int l) { return l >= 0; });
  if (!connected) throw ConfigError("markov_modulated: transition matrix is reducible");
  // The period is the gcd of level[u] + 1 - level[v] over all edges u -> v.
  int period = 0;
  for (Eigen::Index u = 0; u < n; ++u)
    for (Eigen::Index v = 0; v < n; ++v)
      if (p(u, v) > 0.0) period = std::gcd(period, std::abs(forward[u] + 1 - forward[v]));
  if (period != 1) {
    std::ostringstream msg;
    msg << "markov_modulated: transition matrix is periodic (period " << period << ")";
    throw ConfigError(msg.str());
  }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

const char* to_string(EnvironmentFamily family) {
  switch (family) {
    case EnvironmentFamily::IID:
      return "iid";
    case EnvironmentFamily::MarkovModulated:
      return "markov_modulated";
    case EnvironmentFamily::CopulaAR1:
      return "copula_ar1";
  }
  return "unknown";
}

Eigen::VectorXd stationary_vector(const Eigen::MatrixXd& transition) {
  const auto n = transition.rows();
  // Stack (P^T - I) pi = 0 with sum(pi) = 1 and solve in the least-squares sense.
  Eigen::MatrixXd a(n + 1, n);
  a.topRows(n) = transition.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b(n) = 1.0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < n) throw ConfigError("transition matrix has no unique stationary distribution");
  Eigen::VectorXd pi = qr.solve(b);
  if ((a * pi - b).lpNorm<Eigen::Infinity>() > 1e-9 || pi.minCoeff() < -1e-12)
    throw ConfigError("transition matrix has no unique stationary distribution");
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

EnvironmentSpec EnvironmentSpec::iid(Marginal marginal) {
  EnvironmentSpec spec;
  spec.family_ = EnvironmentFamily::IID;
  spec.marginal_ = std::move(marginal);
  return spec;
}

EnvironmentSpec EnvironmentSpec::markov_modulated(std::vector<double> states, Eigen::MatrixXd transition) {
  validate_chain(states, transition);
  EnvironmentSpec spec;
  spec.family_ = EnvironmentFamily::MarkovModulated;
  spec.stationary_ = stationary_vector(transition);
  spec.states_ = std::move(states);
  spec.transition_ = std::move(transition);
  return spec;
}

EnvironmentSpec EnvironmentSpec::copula_ar1(double ar_coefficient, Marginal marginal) {
  if (!std::isfinite(ar_coefficient) || std::abs(ar_coefficient) >= 1.0)
    throw ConfigError("copula_ar1: ar_coefficient must lie in (-1, 1)");
  EnvironmentSpec spec;
  spec.family_ = EnvironmentFamily::CopulaAR1;
  spec.marginal_ = std::move(marginal);
  spec.ar_coefficient_ = ar_coefficient;
  return spec;
}

const Marginal& EnvironmentSpec::marginal() const {
  if (!marginal_) throw UnsupportedError("markov_modulated environment has no parametric marginal");
  return *marginal_;
}

double EnvironmentSpec::bound() const {
  if (family_ == EnvironmentFamily::MarkovModulated) return *std::max_element(states_.begin(), states_.end());
  return marginal_->upper_bound();
}

double EnvironmentSpec::mean() const {
  if (family_ == EnvironmentFamily::MarkovModulated) {
    double m = 0.0;
    for (std::size_t i = 0; i < states_.size(); ++i) m += stationary_(static_cast<Eigen::Index>(i)) * states_[i];
    return m;
  }
  return marginal_->mean();
}

std::optional<DoublyExponentialTail> EnvironmentSpec::doubly_exponential_tail() const {
  if (!marginal_) return std::nullopt;
  return marginal_->doubly_exponential_tail();
}

bool EnvironmentSpec::operator==(const EnvironmentSpec& other) const {
  return family_ == other.family_ && marginal_ == other.marginal_ && states_ == other.states_ &&
         transition_ == other.transition_ && ar_coefficient_ == other.ar_coefficient_;
}

EnvironmentSpec reversed_spec(const EnvironmentSpec& spec) {
  if (spec.family() != EnvironmentFamily::MarkovModulated) return spec;
  const auto& p = spec.transition();
  const auto& pi = spec.stationary();
  const auto n = p.rows();
  if (pi.minCoeff() <= 0.0) throw ConfigError("reversed_spec: a state has zero stationary mass");
  Eigen::MatrixXd reversed(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) reversed(i, j) = pi(j) * p(j, i) / pi(i);
  // Renormalize rows against rounding so the result passes the stochasticity check.
  for (Eigen::Index i = 0; i < n; ++i) reversed.row(i) /= reversed.row(i).sum();
  return EnvironmentSpec::markov_modulated(spec.states(), reversed);
}

double EnvSampler::emit() {
  switch (spec_->family()) {
    case EnvironmentFamily::MarkovModulated:
      value_ = spec_->states()[state_];
      break;
    case EnvironmentFamily::CopulaAR1:
      // Map through the side of Phi with the smaller probability to keep tail accuracy.
      value_ = latent_ > 0.0 ? spec_->marginal().survival_quantile(normal_cdf(-latent_))
                             : spec_->marginal().quantile(normal_cdf(latent_));
      break;
    case EnvironmentFamily::IID:
      break;
  }
  return value_;
}

double EnvSampler::start_stationary(Stream& stream) {
  switch (spec_->family()) {
    case EnvironmentFamily::IID:
      value_ = spec_->marginal().sample(stream);
      return value_;
    case EnvironmentFamily::MarkovModulated: {
      const auto& pi = spec_->stationary();
      const double u = stream.uniform();
      double acc = 0.0;
      state_ = static_cast<std::size_t>(pi.size() - 1);
      for (Eigen::Index i = 0; i < pi.size(); ++i) {
        acc += pi(i);
        if (u < acc) {
          state_ = static_cast<std::size_t>(i);
          break;
        }
      }
      return emit();
    }
    case EnvironmentFamily::CopulaAR1:
      latent_ = stream.normal();
      return emit();
  }
  return value_;
}

void EnvSampler::start_from(const EnvSampler& other) {
  state_ = other.state_;
  latent_ = other.latent_;
  value_ = other.value_;
}

double EnvSampler::next(Stream& stream) {
  switch (spec_->family()) {
    case EnvironmentFamily::IID:
      value_ = spec_->marginal().sample(stream);
      return value_;
    case EnvironmentFamily::MarkovModulated: {
      const auto& p = spec_->transition();
      const auto row = static_cast<Eigen::Index>(state_);
      const double u = stream.uniform();
      double acc = 0.0;
      std::size_t next_state = static_cast<std::size_t>(p.cols() - 1);
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        acc += p(row, j);
        if (u < acc) {
          next_state = static_cast<std::size_t>(j);
          break;
        }
      }
      // Rounding can leave acc slightly below 1; never land on a zero-probability state.
      while (p(row, static_cast<Eigen::Index>(next_state)) == 0.0) --next_state;
      state_ = next_state;
      return emit();
    }
    case EnvironmentFamily::CopulaAR1: {
      const double rho = spec_->ar_coefficient();
      latent_ = rho * latent_ + std::sqrt((1.0 - rho) * (1.0 + rho)) * stream.normal();
      return emit();
    }
  }
  return value_;
}

EnvPath sample_path(const EnvironmentSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample_path: n must be >= 1");
  Stream stream(seed);
  EnvSampler sampler(spec);
  EnvPath path{{}, seed, spec};
  path.values.reserve(n);
  path.values.push_back(sampler.start_stationary(stream));
  for (std::size_t k = 1; k < n; ++k) path.values.push_back(sampler.next(stream));
  return path;
}

Eigen::MatrixXd tilted_matrix(const EnvironmentSpec& spec, double alpha) {
  if (spec.family() != EnvironmentFamily::MarkovModulated)
    throw UnsupportedError("tilted_matrix requires a markov_modulated environment");
  Eigen::MatrixXd m = spec.transition();
  for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j) *= std::exp(alpha * spec.states()[static_cast<std::size_t>(j)]);
  return m;
}

double perron_root_dense(const Eigen::MatrixXd& matrix) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(matrix, false);
  if (solver.info() != Eigen::Success) throw NumericError("perron_root: eigen-decomposition failed");
  const auto& values = solver.eigenvalues();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i)
    if (std::abs(values(i)) > std::abs(values(best))) best = i;
  return std::abs(values(best));
}

double perron_root(const Eigen::MatrixXd& matrix) {
  const auto n = matrix.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  for (int it = 0; it < kPerronIterations; ++it) {
    const Eigen::VectorXd w = matrix * v;
    // Collatz-Wielandt: min_i (Mv)_i / v_i <= rho <= max_i (Mv)_i / v_i.
    double lo = kInfinity;
    double hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(v(i) > 0.0)) return perron_root_dense(matrix);
      const double r = w(i) / v(i);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    if (hi - lo <= kPerronTolerance * hi) return 0.5 * (lo + hi);
    v = w / w.maxCoeff();
  }
  if (n <= 64) return perron_root_dense(matrix);
  throw NumericError("perron_root: power iteration did not converge");
}

double log_perron_root(const Eigen::MatrixXd& transition, const std::vector<double>& states, double alpha) {
  // Factor out exp(alpha * max_j alpha z_j) so the scaled tilt is <= 1 entrywise.
  double shift = -kInfinity;
  for (double z : states) shift = std::max(shift, alpha * z);
  Eigen::MatrixXd m = transition;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    m.col(j) *= std::exp(alpha * states[static_cast<std::size_t>(j)] - shift);
  return shift + std::log(perron_root(m));
}

double exact_cgf_limit(const EnvironmentSpec& spec, double alpha) {
  if (alpha == 0.0) return 0.0;
  switch (spec.family()) {
    case EnvironmentFamily::IID:
      return spec.marginal().log_mgf(alpha);
    case EnvironmentFamily::MarkovModulated:
      if (!std::isfinite(alpha)) throw DomainError("exact_cgf_limit: alpha must be finite");
      return log_perron_root(spec.transition(), spec.states(), alpha);
    case EnvironmentFamily::CopulaAR1:
      break;
  }
  throw UnsupportedError("exact_cgf_limit: no exact form for copula_ar1; use mc_cgf_estimate");
}

std::vector<double> replica_sums(const EnvironmentSpec& spec, std::size_t n, std::size_t replicas, std::uint64_t seed,
                                 unsigned workers) {
  std::vector<double> sums(replicas);
  parallel_for(replicas, workers, [&](std::size_t r) {
    Stream stream(derive_seed(seed, r, StreamRole::Environment));
    EnvSampler sampler(spec);
    CompensatedSum sum;
    sum.add(sampler.start_stationary(stream));
    for (std::size_t k = 1; k < n; ++k) sum.add(sampler.next(stream));
    sums[r] = sum.value();
  });
  return sums;
}

CgfEstimate log_mean_exp_cgf(std::span<const double> sums, double alpha, std::size_t n) {
  if (alpha == 0.0) return {0.0, 0.0};
  double top = -kInfinity;
  for (double s : sums) {
    const double x = alpha * s;
    if (!std::isfinite(x)) {
      std::ostringstream msg;
      msg << "mc_cgf_estimate: exponent " << x << " is not finite";
      throw NumericError(msg.str());
    }
    top = std::max(top, x);
  }
  std::vector<double> scaled(sums.size());
  for (std::size_t r = 0; r < sums.size(); ++r) scaled[r] = std::exp(alpha * sums[r] - top);
  const auto moments = sample_moments(scaled);
  const double log_mean = top + std::log(moments.mean);
  if (!std::isfinite(log_mean)) {
    std::ostringstream msg;
    msg << "mc_cgf_estimate: overflow at exponent " << top;
    throw NumericError(msg.str());
  }
  const double nd = static_cast<double>(n);
  const double se = moments.stdev / (std::sqrt(static_cast<double>(sums.size())) * moments.mean * nd);
  return {log_mean / nd, se};
}

CgfEstimate mc_cgf_estimate(const EnvironmentSpec& spec, double alpha, std::size_t n, std::size_t replicas,
                            std::uint64_t seed, unsigned workers) {
  if (n < 1) throw ConfigError("mc_cgf_estimate: n must be >= 1");
  if (replicas < 2) throw ConfigError("mc_cgf_estimate: replicas must be >= 2");
  if (alpha == 0.0) return {0.0, 0.0};
  const auto sums = replica_sums(spec, n, replicas, seed, workers);
  return log_mean_exp_cgf(sums, alpha, n);
}

}  // namespace qergo
