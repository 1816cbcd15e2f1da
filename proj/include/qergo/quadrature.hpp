#pragma once

#include <functional>

namespace qergo {

struct Quadrature {
  double value = 0.0;
  double error = 0.0;  ///< estimated absolute error
};

enum class QuadratureRule {
  GaussKronrod,  ///< adaptive 15-point Gauss-Kronrod bisection
  TanhSinh,      ///< double-exponential rule, for integrable endpoint singularities
};

/// Adaptive quadrature of f over [a, b]; b may be +infinity.
///
/// Refines until the estimated error is below max(abs_tol, rel_tol * |value|)
/// or the depth limit is hit; throws NumericError in the latter case.
Quadrature integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                     double rel_tol = 1e-13, QuadratureRule rule = QuadratureRule::GaussKronrod);

}  // namespace qergo
