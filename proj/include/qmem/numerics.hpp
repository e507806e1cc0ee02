#pragma once

#include <cmath>
#include <functional>

namespace qmem {

struct ScalarMinimum {
  double x = 0.0;
  double value = 0.0;
};

// Golden-section search for a minimum of f on [lo, hi]. The bracket shrinks
// until its width is below abs_tol. Never returns a point worse than the
// better endpoint.
inline ScalarMinimum golden_section_minimize(const std::function<double(double)>& f,
                                             double lo, double hi, double abs_tol,
                                             int max_iterations = 200) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iterations && std::abs(b - a) > abs_tol; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  ScalarMinimum best = fc < fd ? ScalarMinimum{c, fc} : ScalarMinimum{d, fd};
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo < best.value) best = {lo, flo};
  if (fhi < best.value) best = {hi, fhi};
  return best;
}

}  // namespace qmem
