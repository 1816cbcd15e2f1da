#pragma once

#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "qergo/rng.hpp"

namespace qergo {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Constants of a doubly-exponential tail bound P(Z >= z) <= c1 exp(-c2 exp(c3 z)).
struct DoublyExponentialTail {
  double c1;
  double c2;
  double c3;
  bool operator==(const DoublyExponentialTail&) const = default;
};

namespace law {
struct Degenerate {
  double value;
  bool operator==(const Degenerate&) const = default;
};
struct Exponential {
  double rate;
  bool operator==(const Exponential&) const = default;
};
struct Uniform {
  double lo;
  double hi;
  bool operator==(const Uniform&) const = default;
};
/// Exponential(rate) conditioned on [0, bound].
struct TruncatedExponential {
  double rate;
  double bound;
  bool operator==(const TruncatedExponential&) const = default;
};
/// Z = ln(1 + E / c2) / c3 with E unit exponential, so P(Z >= z) = exp(-c2 (e^{c3 z} - 1)).
struct DoublyExponential {
  double c2;
  double c3;
  bool operator==(const DoublyExponential&) const = default;
};
}  // namespace law

/// A nonnegative one-dimensional law used as the marginal of an inter-arrival process.
class Marginal {
 public:
  using Law = std::variant<law::Degenerate, law::Exponential, law::Uniform, law::TruncatedExponential,
                           law::DoublyExponential>;

  /// Throws ConfigError when the parameters are invalid.
  explicit Marginal(Law law);

  static Marginal degenerate(double value) { return Marginal(law::Degenerate{value}); }
  static Marginal exponential(double rate) { return Marginal(law::Exponential{rate}); }
  static Marginal uniform(double lo, double hi) { return Marginal(law::Uniform{lo, hi}); }
  static Marginal truncated_exponential(double rate, double bound) {
    return Marginal(law::TruncatedExponential{rate, bound});
  }
  static Marginal doubly_exponential(double c2, double c3) { return Marginal(law::DoublyExponential{c2, c3}); }

  const Law& law() const { return law_; }
  std::string name() const;

  double mean() const;
  /// Almost-sure upper bound, +infinity when unbounded.
  double upper_bound() const;
  double cdf(double z) const;
  /// F^{-1}(u) for u in (0, 1).
  double quantile(double u) const;
  /// F^{-1}(1 - q), accurate for small q.
  double survival_quantile(double q) const;
  double sample(Stream& stream) const;

  /// Supremum of the set of alpha with E[e^{alpha Z}] finite.
  double mgf_abscissa() const;
  /// ln E[e^{alpha Z}]; throws DomainError outside the MGF domain.
  double log_mgf(double alpha) const;

  /// Tail constants when the law is of doubly-exponential type.
  std::optional<DoublyExponentialTail> doubly_exponential_tail() const;

  bool operator==(const Marginal&) const = default;

 private:
  Law law_;
};


}  // namespace qergo
