#include "qergo/marginal.hpp"

#include <boost/math/special_functions/expint.hpp>
#include <cmath>
#include <sstream>

#include "qergo/errors.hpp"
#include "qergo/quadrature.hpp"

namespace qergo {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

[[noreturn]] void mgf_domain_error(const std::string& law, double alpha, double abscissa) {
  std::ostringstream msg;
  msg << law << ": MGF argument " << alpha << " outside domain (-inf, " << abscissa << ")";
  throw DomainError(msg.str());
}

// E[e^{alpha Z}] = 1 + alpha * integral of e^{alpha z} P(Z > z) over z >= 0.
double doubly_exponential_mgf(double c2, double c3, double alpha) {
  // Beyond z_max the survival function is below e^{-745}, under the smallest double.
  const double z_max = std::log1p(745.0 / c2) / c3;
  auto integrand = [=](double z) { return std::exp(alpha * z - c2 * std::expm1(c3 * z)); };
  return 1.0 + alpha * integrate(integrand, 0.0, z_max, 0.0, 1e-13).value;
}

}  // namespace


Marginal::Marginal(Law law) : law_(law) {
  std::visit(Overloaded{
                 [](const law::Degenerate& d) {
                   if (!std::isfinite(d.value) || d.value < 0.0)
                     throw ConfigError("degenerate law: value must be finite and >= 0");
                 },
                 [](const law::Exponential& e) {
                   if (!positive_finite(e.rate)) throw ConfigError("exponential law: rate must be > 0");
                 },
                 [](const law::Uniform& u) {
                   if (!std::isfinite(u.lo) || !std::isfinite(u.hi) || u.lo < 0.0 || !(u.lo < u.hi))
                     throw ConfigError("uniform law: need 0 <= lo < hi");
                 },
                 [](const law::TruncatedExponential& t) {
                   if (!positive_finite(t.rate) || !positive_finite(t.bound))
                     throw ConfigError("truncated exponential law: rate and bound must be > 0");
                 },
                 [](const law::DoublyExponential& d) {
                   if (!positive_finite(d.c2) || !positive_finite(d.c3))
                     throw ConfigError("doubly exponential law: c2 and c3 must be > 0");
                 },
             },
             law_);
}

std::string Marginal::name() const {
  return std::visit(Overloaded{
                        [](const law::Degenerate&) { return std::string("degenerate"); },
                        [](const law::Exponential&) { return std::string("exponential"); },
                        [](const law::Uniform&) { return std::string("uniform"); },
                        [](const law::TruncatedExponential&) { return std::string("truncated_exponential"); },
                        [](const law::DoublyExponential&) { return std::string("doubly_exponential"); },
                    },
                    law_);
}

double Marginal::mean() const {
  return std::visit(Overloaded{
                        [](const law::Degenerate& d) { return d.value; },
                        [](const law::Exponential& e) { return 1.0 / e.rate; },
                        [](const law::Uniform& u) { return 0.5 * (u.lo + u.hi); },
                        [](const law::TruncatedExponential& t) {
                          return 1.0 / t.rate - t.bound / std::expm1(t.rate * t.bound);
                        },
                        [](const law::DoublyExponential& d) {
                          // E ln(1 + E/c2) = e^{c2} E_1(c2)
                          return std::exp(d.c2) * boost::math::expint(1, d.c2) / d.c3;
                        },
                    },
                    law_);
}

double Marginal::upper_bound() const {
  return std::visit(Overloaded{
                        [](const law::Degenerate& d) { return d.value; },
                        [](const law::Exponential&) { return kInfinity; },
                        [](const law::Uniform& u) { return u.hi; },
                        [](const law::TruncatedExponential& t) { return t.bound; },
                        [](const law::DoublyExponential&) { return kInfinity; },
                    },
                    law_);
}

double Marginal::cdf(double z) const {
  if (z < 0.0) return 0.0;
  return std::visit(Overloaded{
                        [=](const law::Degenerate& d) { return z >= d.value ? 1.0 : 0.0; },
                        [=](const law::Exponential& e) { return -std::expm1(-e.rate * z); },
                        [=](const law::Uniform& u) {
                          if (z <= u.lo) return 0.0;
                          if (z >= u.hi) return 1.0;
                          return (z - u.lo) / (u.hi - u.lo);
                        },
                        [=](const law::TruncatedExponential& t) {
                          if (z >= t.bound) return 1.0;
                          return std::expm1(-t.rate * z) / std::expm1(-t.rate * t.bound);
                        },
                        [=](const law::DoublyExponential& d) { return -std::expm1(-d.c2 * std::expm1(d.c3 * z)); },
                    },
                    law_);
}

double Marginal::quantile(double u) const {
  return std::visit(Overloaded{
                        [](const law::Degenerate& d) { return d.value; },
                        [=](const law::Exponential& e) { return -std::log1p(-u) / e.rate; },
                        [=](const law::Uniform& l) { return l.lo + u * (l.hi - l.lo); },
                        [=](const law::TruncatedExponential& t) {
                          return -std::log1p(u * std::expm1(-t.rate * t.bound)) / t.rate;
                        },
                        [=](const law::DoublyExponential& d) { return std::log1p(-std::log1p(-u) / d.c2) / d.c3; },
                    },
                    law_);
}

double Marginal::survival_quantile(double q) const {
  return std::visit(Overloaded{
                        [](const law::Degenerate& d) { return d.value; },
                        [=](const law::Exponential& e) { return -std::log(q) / e.rate; },
                        [=](const law::Uniform& l) { return l.hi - q * (l.hi - l.lo); },
                        [=](const law::TruncatedExponential& t) {
                          // 1 - F(z) = (e^{-rz} - e^{-rM}) / (1 - e^{-rM}) = q
                          const double tail = -std::expm1(-t.rate * t.bound);
                          return -std::log(q * tail + std::exp(-t.rate * t.bound)) / t.rate;
                        },
                        [=](const law::DoublyExponential& d) { return std::log1p(-std::log(q) / d.c2) / d.c3; },
                    },
                    law_);
}

double Marginal::sample(Stream& stream) const {
  return std::visit(Overloaded{
                        [](const law::Degenerate& d) { return d.value; },
                        [&](const law::Exponential& e) { return stream.exponential() / e.rate; },
                        [&](const law::DoublyExponential& d) { return std::log1p(stream.exponential() / d.c2) / d.c3; },
                        [&](const auto&) { return quantile(stream.uniform_open()); },
                    },
                    law_);
}

double Marginal::mgf_abscissa() const {
  if (const auto* e = std::get_if<law::Exponential>(&law_)) return e->rate;
  return kInfinity;
}

double Marginal::log_mgf(double alpha) const {
  if (!std::isfinite(alpha)) throw DomainError(name() + ": MGF argument must be finite");
  if (alpha == 0.0) return 0.0;
  return std::visit(
      Overloaded{
          [=](const law::Degenerate& d) { return alpha * d.value; },
          [=, this](const law::Exponential& e) {
            if (!(alpha < e.rate)) mgf_domain_error(name(), alpha, e.rate);
            return -std::log1p(-alpha / e.rate);
          },
          [=](const law::Uniform& u) {
            const double x = alpha * (u.hi - u.lo);
            return alpha * u.lo + std::log(std::expm1(x) / x);
          },
          [=](const law::TruncatedExponential& t) {
            const double r = t.rate;
            const double m = t.bound;
            const double gap = r - alpha;
            if (gap == 0.0) return std::log(r * m / -std::expm1(-r * m));
            // r/(r-a) * (1 - e^{-(r-a)M}) / (1 - e^{-rM}); both ratios share a sign.
            return std::log((r / gap) * (std::expm1(-gap * m) / std::expm1(-r * m)));
          },
          [=](const law::DoublyExponential& d) {
            return std::log(doubly_exponential_mgf(d.c2, d.c3, alpha));
          },
      },
      law_);
}

std::optional<DoublyExponentialTail> Marginal::doubly_exponential_tail() const {
  if (const auto* d = std::get_if<law::DoublyExponential>(&law_)) {
    return DoublyExponentialTail{std::exp(d->c2), d->c2, d->c3};
  }
  return std::nullopt;
}

}  // namespace qergo
