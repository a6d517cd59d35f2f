#include "modlab/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <string>

namespace modlab {

double integrate(const RealFn& f, double a, double b, double abs_tol, double rel_tol) {
  if (a == b) return 0.0;
  double err = 0.0, l1 = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, 18, rel_tol, &err, &l1);
  if (!std::isfinite(v) || err > 10.0 * std::max(abs_tol, rel_tol * l1))
    throw numerical_error("quadrature did not converge on [" + std::to_string(a) + ", " +
                          std::to_string(b) + "], error estimate " + std::to_string(err));
  return v;
}

double integrate_pieces(const RealFn& f, std::span<const double> breaks, double abs_tol,
                        double rel_tol) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    total += integrate(f, breaks[i], breaks[i + 1], abs_tol, rel_tol);
  return total;
}

}  // namespace modlab
