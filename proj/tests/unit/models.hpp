#pragma once

#include <Eigen/Dense>

#include "qergo/lindley.hpp"

namespace qergo::testing {

inline QueueModel mm1(TheoremMode mode = TheoremMode::None) {
  return {EnvironmentSpec::iid(Marginal::exponential(1.0)), ServiceSpec::exponential(2.0, mode)};
}

inline QueueModel deterministic(double s, double z) {
  return {EnvironmentSpec::iid(Marginal::degenerate(z)), ServiceSpec::degenerate(s)};
}

inline Eigen::MatrixXd matrix2(double a, double b, double c, double d) {
  Eigen::MatrixXd p(2, 2);
  p << a, b, c, d;
  return p;
}

inline EnvironmentSpec sticky_chain() { return EnvironmentSpec::markov_modulated({1.0, 3.0}, matrix2(0.9, 0.1, 0.1, 0.9)); }

inline QueueModel bounded_markov(TheoremMode mode = TheoremMode::BoundedEnv) {
  return {sticky_chain(), ServiceSpec::exponential(2.0, mode)};
}

inline QueueModel light_tail() {
  return {EnvironmentSpec::iid(Marginal::doubly_exponential(0.01, 4.0)),
          ServiceSpec::exponential(2.0, TheoremMode::LightTailEnv)};
}

}  // namespace qergo::testing
