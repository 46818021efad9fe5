#pragma once

#include <cmath>
#include <string>

#include "bpre/env_models.hpp"

namespace bpre {

namespace detail {

template <class Fn>
double simpson_step(const Fn& fn, double a, double b, double fa, double fm,
                    double fb, double whole, double tol, int depth, int& evals) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = fn(lm);
  const double frm = fn(rm);
  evals += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) {
    throw NumericalError("adaptive Simpson: no convergence on [" +
                         std::to_string(a) + ", " + std::to_string(b) +
                         "], residual " + std::to_string(delta));
  }
  return simpson_step(fn, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals) +
         simpson_step(fn, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals);
}

}  // namespace detail

/// Adaptive Simpson quadrature with Richardson correction. Throws
/// NumericalError when the recursion depth is exhausted.
template <class Fn>
double integrate(const Fn& fn, double a, double b, double abs_tol = 1e-13,
                 int max_depth = 48) {
  if (a == b) return 0.0;
  const double fa = fn(a);
  const double fb = fn(b);
  const double fm = fn(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  int evals = 3;
  return detail::simpson_step(fn, a, b, fa, fm, fb, whole, abs_tol, max_depth, evals);
}

}  // namespace bpre
