#pragma once

#include <functional>
#include <span>
#include <stdexcept>

namespace modlab {

struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct singular_evaluation : std::domain_error {
  using std::domain_error::domain_error;
};

using RealFn = std::function<double(double)>;

// Adaptive 31-point Gauss-Kronrod on [a, b] (finite). Throws numerical_error
// when the error estimate stays above max(abs_tol, rel_tol * L1).
double integrate(const RealFn& f, double a, double b, double abs_tol = 1e-13,
                 double rel_tol = 1e-12);

// Same, with [breaks.front(), breaks.back()] split at every interior break.
double integrate_pieces(const RealFn& f, std::span<const double> breaks,
                        double abs_tol = 1e-13, double rel_tol = 1e-12);

}  // namespace modlab
