#include "qergo/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "qergo/errors.hpp"

namespace qergo {

Quadrature integrate(const std::function<double(double)>& f, double a, double b, double abs_tol, double rel_tol,
                     QuadratureRule rule) {
  if (!(b >= a)) throw DomainError("integrate: empty or reversed interval");
  if (a == b) return {};
  Quadrature q;
  double l1 = 0.0;
  // Boost stops on error <= tol * L1, so translate the absolute target through a coarse L1 estimate.
  // Tolerances tighter than a few ulps only make it recurse to the depth limit.
  double coarse_l1 = 0.0;
  double coarse_error = 0.0;
  const double coarse =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &coarse_error, &coarse_l1);
  const double wanted = std::max(abs_tol, rel_tol * std::abs(coarse));
  const double floor_tol = 8.0 * std::numeric_limits<double>::epsilon();
  const double inner_tol = coarse_l1 > 0.0 ? std::max(0.25 * wanted / coarse_l1, floor_tol) : floor_tol;
  if (rule == QuadratureRule::TanhSinh && std::isfinite(b)) {
    boost::math::quadrature::tanh_sinh<double> integrator(15);
    q.value = integrator.integrate(f, a, b, inner_tol, &q.error, &l1);
  } else {
    q.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 18, inner_tol, &q.error, &l1);
  }
  const double target = std::max(abs_tol, rel_tol * std::abs(q.value));
  if (!std::isfinite(q.value) || !(q.error <= target)) {
    std::ostringstream msg;
    msg << "quadrature did not converge on [" << a << ", " << b << "]: value " << q.value << ", error " << q.error
        << " > tolerance " << target;
    throw NumericError(msg.str());
  }
  return q;
}

}  // namespace qergo
