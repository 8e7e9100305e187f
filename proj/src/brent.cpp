#include "contactplan/brent.hpp"

#include <cmath>
#include <limits>

#include "contactplan/errors.hpp"

namespace contactplan {
namespace {

constexpr double kGolden = 0.3819660112501051;  // (3 - sqrt(5)) / 2

ScalarMinimum iterate(const std::function<double(double)>& f, double lo, double hi, double x,
                      double fx, double tol) {
  const double eps = 4.0 * std::numeric_limits<double>::epsilon();
  double w = x, v = x;
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  ScalarMinimum out{x, fx, 0};
  for (int iter = 1; iter <= kBrentMaxIterations; ++iter) {
    out.iterations = iter;
    const double mid = 0.5 * (lo + hi);
    const double tol1 = 0.5 * tol + eps * std::abs(x);
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (hi - lo)) break;

    bool golden = true;
    if (std::abs(e) > tol1) {
      // Parabola through (x, fx), (w, fw), (v, fv).
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (lo - x) && p < q * (hi - x)) {
        d = p / q;
        const double u = x + d;
        if (u - lo < tol2 || hi - u < tol2) d = (mid >= x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= mid) ? lo - x : hi - x;
      d = kGolden * e;
    }

    const double u = (std::abs(d) >= tol1) ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = f(u);

    if (fu <= fx) {
      if (u >= x) lo = x; else hi = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) lo = u; else hi = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  out.x = x;
  out.fx = fx;
  return out;
}

}  // namespace

ScalarMinimum brent_minimize(const std::function<double(double)>& f, double a, double b,
                             double c, double tol) {
  if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(c)) || !(a < b && b < c)) {
    throw ArgumentError("brent: bracket must satisfy a < b < c");
  }
  if (!(tol > 0.0)) throw ArgumentError("brent: tolerance must be positive");
  const double fb = f(b);
  const double fa = f(a);
  const double fc = f(c);
  if (!(fb <= fa && fb <= fc)) {
    throw ArgumentError("brent: f(b) must not exceed f(a) or f(c)");
  }
  return iterate(f, a, c, b, fb, tol);
}

ScalarMinimum brent_minimize_bounded(const std::function<double(double)>& f, double lo,
                                     double hi, double tol) {
  if (!(std::isfinite(lo) && std::isfinite(hi)) || !(lo < hi)) {
    throw ArgumentError("brent: interval must satisfy lo < hi");
  }
  if (!(tol > 0.0)) throw ArgumentError("brent: tolerance must be positive");
  const double x = lo + kGolden * (hi - lo);
  return iterate(f, lo, hi, x, f(x), tol);
}

}  // namespace contactplan
