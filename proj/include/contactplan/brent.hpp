#pragma once

#include <functional>

namespace contactplan {

struct ScalarMinimum {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

inline constexpr int kBrentMaxIterations = 100;

// Brent's method (golden section with parabolic interpolation) started from a
// bracket a < b < c with f(b) <= min(f(a), f(c)). Stops once the minimizer is
// located to within `tol` (absolute) or after kBrentMaxIterations.
ScalarMinimum brent_minimize(const std::function<double(double)>& f, double a, double b,
                             double c, double tol);

// Same iteration on a closed interval without a known interior point; starts
// at the golden-section point. Useful when the best grid point sits on a
// boundary of the search interval.
ScalarMinimum brent_minimize_bounded(const std::function<double(double)>& f, double lo,
                                     double hi, double tol);

}  // namespace contactplan
