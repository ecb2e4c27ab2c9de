#ifndef SBD_QUADRATURE_HPP
#define SBD_QUADRATURE_HPP

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "sbd/error.hpp"

namespace sbd::quadrature {

/// Tightest relative tolerance the 61-point rule resolves reliably in double precision.
inline constexpr double kMinRelTol = 1e-10;

struct Result {
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;
};

/// Adaptive 61-point Gauss-Kronrod on [a, b]; b may be +infinity.
///
/// Throws NumericalError when the error estimate exceeds rel_tol times the L1 norm
/// of the integrand (or abs_tol, whichever is larger).
template <class F>
Result integrate(F&& f, double a, double b, double rel_tol, double abs_tol = 0.0,
                 unsigned max_depth = 18) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  // Below ~1e-10 the Kronrod-Gauss difference is rounding noise and subdividing
  // short intervals makes the estimate worse, not better.
  rel_tol = std::max(rel_tol, kMinRelTol);
  Result r;
  r.value = Rule::integrate(f, a, b, 0, rel_tol, &r.error, &r.l1);
  if (!(r.error <= std::max(rel_tol * r.l1, abs_tol))) {
    r.value = Rule::integrate(f, a, b, max_depth, rel_tol, &r.error, &r.l1);
  }
  const double allowed = std::max(rel_tol * r.l1, abs_tol);
  if (!std::isfinite(r.value) || r.error > allowed * 1.0000001) {
    std::ostringstream msg;
    msg << "quadrature on [" << a << ", " << b << "] did not reach tolerance: error "
        << r.error << " > " << allowed;
    throw NumericalError(msg.str());
  }
  return r;
}

template <class F>
double integrate_value(F&& f, double a, double b, double rel_tol, double abs_tol = 0.0) {
  return integrate(std::forward<F>(f), a, b, rel_tol, abs_tol).value;
}

/// Fixed 30-point Gauss-Legendre rule for short intervals with a smooth integrand.
template <class F>
double gauss_legendre(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 30>::integrate(f, a, b);
}

}  // namespace sbd::quadrature

#endif  // SBD_QUADRATURE_HPP
