#include "qergo/service.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qergo/errors.hpp"
#include "qergo/marginal.hpp"

namespace qergo {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

double gamma_log_density(double shape, double rate, double s) {
  return shape * std::log(rate) + (shape - 1.0) * std::log(s) - rate * s - std::lgamma(shape);
}

// P(lo <= S <= hi) for Exponential(rate), lo >= 0.
double exponential_interval(double rate, double lo, double hi) {
  return std::exp(-rate * lo) * -std::expm1(-rate * (hi - lo));
}

std::optional<DensityFloor> compute_floor(const ServiceSpec::Law& law) {
  return std::visit(
      Overloaded{
          [](const service::Exponential& e) -> std::optional<DensityFloor> { return DensityFloor{e.rate, e.rate}; },
          [](const service::ExponentialMixture& m) -> std::optional<DensityFloor> {
            double c4 = 0.0;
            double c5 = 0.0;
            for (std::size_t i = 0; i < m.rates.size(); ++i) {
              c4 += m.weights[i] * m.rates[i];
              c5 = std::max(c5, m.rates[i]);
            }
            return DensityFloor{c4, c5};
          },
          [](const service::Gamma& g) -> std::optional<DensityFloor> {
            if (g.shape > 1.0) return std::nullopt;
            if (g.shape == 1.0) return DensityFloor{g.rate, g.rate};
            // With c5 = 2 rate, f(s) e^{c5 s} is minimized at s* = (1 - shape) / rate.
            const double c5 = 2.0 * g.rate;
            const double s_star = (1.0 - g.shape) / g.rate;
            return DensityFloor{std::exp(gamma_log_density(g.shape, g.rate, s_star) + c5 * s_star), c5};
          },
          [](const auto&) -> std::optional<DensityFloor> { return std::nullopt; },
      },
      law);
}

}  // namespace

const char* to_string(TheoremMode mode) {
  switch (mode) {
    case TheoremMode::None:
      return "none";
    case TheoremMode::BoundedEnv:
      return "bounded_env";
    case TheoremMode::LightTailEnv:
      return "light_tail_env";
  }
  return "unknown";
}

ServiceSpec::ServiceSpec(Law law, TheoremMode mode) : law_(std::move(law)), mode_(mode) {
  std::visit(Overloaded{
                 [](const service::Degenerate& d) {
                   if (!std::isfinite(d.value) || d.value < 0.0)
                     throw ConfigError("degenerate service: value must be finite and >= 0");
                 },
                 [](const service::Exponential& e) {
                   if (!positive_finite(e.rate)) throw ConfigError("exponential service: rate must be > 0");
                 },
                 [](const service::Gamma& g) {
                   if (!positive_finite(g.shape) || !positive_finite(g.rate))
                     throw ConfigError("gamma service: shape and rate must be > 0");
                 },
                 [](const service::UniformShifted& u) {
                   if (!std::isfinite(u.lo) || !std::isfinite(u.hi) || u.lo < 0.0 || !(u.lo < u.hi))
                     throw ConfigError("uniform_shifted service: need 0 <= lo < hi");
                 },
                 [](const service::ExponentialMixture& m) {
                   if (m.weights.empty() || m.weights.size() != m.rates.size())
                     throw ConfigError("exponential_mixture service: weights and rates must be nonempty and equal length");
                   double total = 0.0;
                   for (std::size_t i = 0; i < m.weights.size(); ++i) {
                     if (!positive_finite(m.weights[i]) || !positive_finite(m.rates[i]))
                       throw ConfigError("exponential_mixture service: weights and rates must be > 0");
                     total += m.weights[i];
                   }
                   if (std::abs(total - 1.0) > 1e-12)
                     throw ConfigError("exponential_mixture service: weights must sum to 1");
                 },
             },
             law_);
  floor_ = compute_floor(law_);
  if (mode_ == TheoremMode::BoundedEnv && !has_density())
    throw ConfigError(name() + " service: bounded_env mode requires a density");
  if (mode_ == TheoremMode::LightTailEnv && !floor_)
    throw ConfigError(name() +
                      " service: light_tail_env mode requires a nonincreasing density with an exponential floor");
}

std::string ServiceSpec::name() const {
  return std::visit(Overloaded{
                        [](const service::Degenerate&) { return std::string("degenerate"); },
                        [](const service::Exponential&) { return std::string("exponential"); },
                        [](const service::Gamma&) { return std::string("gamma"); },
                        [](const service::UniformShifted&) { return std::string("uniform_shifted"); },
                        [](const service::ExponentialMixture&) { return std::string("exponential_mixture"); },
                    },
                    law_);
}

double ServiceSpec::mean() const {
  return std::visit(Overloaded{
                        [](const service::Degenerate& d) { return d.value; },
                        [](const service::Exponential& e) { return 1.0 / e.rate; },
                        [](const service::Gamma& g) { return g.shape / g.rate; },
                        [](const service::UniformShifted& u) { return 0.5 * (u.lo + u.hi); },
                        [](const service::ExponentialMixture& m) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < m.rates.size(); ++i) s += m.weights[i] / m.rates[i];
                          return s;
                        },
                    },
                    law_);
}

double ServiceSpec::beta0() const {
  return std::visit(Overloaded{
                        [](const service::Exponential& e) { return e.rate; },
                        [](const service::Gamma& g) { return g.rate; },
                        [](const service::ExponentialMixture& m) {
                          return *std::min_element(m.rates.begin(), m.rates.end());
                        },
                        [](const auto&) { return kInfinity; },
                    },
                    law_);
}

double ServiceSpec::log_mgf(double beta) const {
  if (!std::isfinite(beta)) throw DomainError(name() + " service: MGF argument must be finite");
  if (beta == 0.0) return 0.0;
  if (!(beta < beta0())) {
    std::ostringstream msg;
    msg << name() << " service: MGF argument " << beta << " >= beta0 = " << beta0();
    throw DomainError(msg.str());
  }
  return std::visit(Overloaded{
                        [=](const service::Degenerate& d) { return beta * d.value; },
                        [=](const service::Exponential& e) { return -std::log1p(-beta / e.rate); },
                        [=](const service::Gamma& g) { return -g.shape * std::log1p(-beta / g.rate); },
                        [=](const service::UniformShifted& u) {
                          const double x = beta * (u.hi - u.lo);
                          return beta * u.lo + std::log(std::expm1(x) / x);
                        },
                        [=](const service::ExponentialMixture& m) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < m.rates.size(); ++i)
                            s += m.weights[i] * m.rates[i] / (m.rates[i] - beta);
                          return std::log(s);
                        },
                    },
                    law_);
}

double ServiceSpec::mgf(double beta) const { return std::exp(log_mgf(beta)); }

bool ServiceSpec::has_density() const { return !std::holds_alternative<service::Degenerate>(law_); }

bool ServiceSpec::density_singular_at_zero() const {
  const auto* g = std::get_if<service::Gamma>(&law_);
  return g != nullptr && g->shape < 1.0;
}

double ServiceSpec::density(double s) const {
  if (s < 0.0) return 0.0;
  return std::visit(Overloaded{
                        [](const service::Degenerate&) -> double {
                          throw UnsupportedError("degenerate service has no density");
                        },
                        [=](const service::Exponential& e) { return e.rate * std::exp(-e.rate * s); },
                        [=](const service::Gamma& g) {
                          if (s == 0.0) {
                            if (g.shape < 1.0) return kInfinity;
                            return g.shape == 1.0 ? g.rate : 0.0;
                          }
                          return std::exp(gamma_log_density(g.shape, g.rate, s));
                        },
                        [=](const service::UniformShifted& u) {
                          return (s >= u.lo && s <= u.hi) ? 1.0 / (u.hi - u.lo) : 0.0;
                        },
                        [=](const service::ExponentialMixture& m) {
                          double f = 0.0;
                          for (std::size_t i = 0; i < m.rates.size(); ++i)
                            f += m.weights[i] * m.rates[i] * std::exp(-m.rates[i] * s);
                          return f;
                        },
                    },
                    law_);
}

double ServiceSpec::cdf(double s) const {
  if (s < 0.0) return 0.0;
  return std::visit(Overloaded{
                        [=](const service::Degenerate& d) { return s >= d.value ? 1.0 : 0.0; },
                        [=](const service::Exponential& e) { return -std::expm1(-e.rate * s); },
                        [=](const service::Gamma& g) { return boost::math::gamma_p(g.shape, g.rate * s); },
                        [=](const service::UniformShifted& u) {
                          if (s <= u.lo) return 0.0;
                          if (s >= u.hi) return 1.0;
                          return (s - u.lo) / (u.hi - u.lo);
                        },
                        [=](const service::ExponentialMixture& m) {
                          double c = 0.0;
                          for (std::size_t i = 0; i < m.rates.size(); ++i)
                            c += m.weights[i] * -std::expm1(-m.rates[i] * s);
                          return c;
                        },
                    },
                    law_);
}

double ServiceSpec::interval_probability(double lo, double hi) const {
  lo = std::max(lo, 0.0);
  if (!(hi > lo)) {
    // Only a point mass can charge a single point.
    const auto* d = std::get_if<service::Degenerate>(&law_);
    return (d != nullptr && hi == lo && d->value == lo) ? 1.0 : 0.0;
  }
  return std::visit(Overloaded{
                        [=](const service::Degenerate& d) { return (d.value >= lo && d.value <= hi) ? 1.0 : 0.0; },
                        [=](const service::Exponential& e) { return exponential_interval(e.rate, lo, hi); },
                        [=](const service::Gamma& g) {
                          const double a = g.rate * lo;
                          const double b = g.rate * hi;
                          if (a > g.shape) return boost::math::gamma_q(g.shape, a) - boost::math::gamma_q(g.shape, b);
                          return boost::math::gamma_p(g.shape, b) - boost::math::gamma_p(g.shape, a);
                        },
                        [=](const service::UniformShifted& u) {
                          const double overlap = std::min(hi, u.hi) - std::max(lo, u.lo);
                          return overlap > 0.0 ? overlap / (u.hi - u.lo) : 0.0;
                        },
                        [=](const service::ExponentialMixture& m) {
                          double p = 0.0;
                          for (std::size_t i = 0; i < m.rates.size(); ++i)
                            p += m.weights[i] * exponential_interval(m.rates[i], lo, hi);
                          return p;
                        },
                    },
                    law_);
}

double ServiceSpec::density_infimum(double lo, double hi) const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo < 0.0 || lo > hi) {
    std::ostringstream msg;
    msg << "density_infimum: need 0 <= lo <= hi < infinity, got [" << lo << ", " << hi << "]";
    throw DomainError(msg.str());
  }
  if (!has_density()) return 0.0;
  return std::visit(Overloaded{
                        [=, this](const service::Gamma& g) {
                          // Nonincreasing for shape <= 1, unimodal otherwise: the infimum sits at an endpoint.
                          if (g.shape <= 1.0) return density(hi);
                          return std::min(density(lo), density(hi));
                        },
                        [=](const service::UniformShifted& u) {
                          return (lo >= u.lo && hi <= u.hi) ? 1.0 / (u.hi - u.lo) : 0.0;
                        },
                        // Exponential and mixtures are nonincreasing.
                        [=, this](const auto&) { return density(hi); },
                    },
                    law_);
}

double ServiceSpec::support_upper() const {
  return std::visit(Overloaded{
                        [](const service::Degenerate& d) { return d.value; },
                        [](const service::UniformShifted& u) { return u.hi; },
                        [](const auto&) { return kInfinity; },
                    },
                    law_);
}

double ServiceSpec::sample(Stream& stream) const {
  return std::visit(Overloaded{
                        [](const service::Degenerate& d) { return d.value; },
                        [&](const service::Exponential& e) { return stream.exponential() / e.rate; },
                        [&](const service::Gamma& g) {
                          return boost::math::gamma_p_inv(g.shape, stream.uniform_open()) / g.rate;
                        },
                        [&](const service::UniformShifted& u) { return u.lo + stream.uniform() * (u.hi - u.lo); },
                        [&](const service::ExponentialMixture& m) {
                          const double u = stream.uniform();
                          double acc = 0.0;
                          std::size_t k = m.rates.size() - 1;
                          for (std::size_t i = 0; i < m.rates.size(); ++i) {
                            acc += m.weights[i];
                            if (u < acc) {
                              k = i;
                              break;
                            }
                          }
                          return stream.exponential() / m.rates[k];
                        },
                    },
                    law_);
}

}  // namespace qergo
