#pragma once

// One-dimensional root finding and minimization used by the hyperparameter
// updates and by the test oracles.

#include <cmath>
#include <functional>
#include <sstream>
#include <utility>

#include "ebsl/errors.hpp"

namespace ebsl {

struct RootResult {
  double root = 0.0;
  double f_lo = 0.0;  // F at the final bracket ends
  double f_hi = 0.0;
  int evaluations = 0;
};

/// Root of an increasing-through-zero function on (0, inf).  Starts from
/// [lo, hi], expands geometrically (factor 1e3, at most `max_expand` times
/// per side) until F(lo) < 0 < F(hi), then bisects in log space.
template <typename F>
RootResult bisect_positive(F&& f, double lo = 1e-10, double hi = 1e10, int max_expand = 20) {
  RootResult r;
  double flo = f(lo);
  double fhi = f(hi);
  r.evaluations = 2;
  for (int i = 0; i < max_expand && flo > 0.0; ++i) {
    hi = lo;
    fhi = flo;
    lo *= 1e-3;
    flo = f(lo);
    ++r.evaluations;
  }
  for (int i = 0; i < max_expand && fhi < 0.0; ++i) {
    lo = hi;
    flo = fhi;
    hi *= 1e3;
    fhi = f(hi);
    ++r.evaluations;
  }
  if (!(flo <= 0.0 && fhi >= 0.0)) {
    std::ostringstream os;
    os << "no sign change: F(" << lo << ")=" << flo << ", F(" << hi << ")=" << fhi;
    throw RootNotFound(os.str());
  }
  r.f_lo = flo;
  r.f_hi = fhi;
  if (flo == 0.0) {
    r.root = lo;
    return r;
  }
  if (fhi == 0.0) {
    r.root = hi;
    return r;
  }
  for (int it = 0; it < 200; ++it) {
    // geometric midpoint while the bracket spans decades, arithmetic afterwards
    const double mid = (hi / lo > 4.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    ++r.evaluations;
    if (!std::isfinite(fm)) throw NumericError("bisect_positive: non-finite F");
    if (fm == 0.0) {
      lo = hi = mid;
      break;
    }
    if (fm < 0.0) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  r.root = 0.5 * (lo + hi);
  return r;
}

struct MinimumResult {
  double x = 0.0;
  double value = 0.0;
};

/// Golden-section search for a minimum of a unimodal function on [a, b].
template <typename F>
MinimumResult golden_section(F&& f, double a, double b, double rel_tol = 1e-12,
                             int max_iter = 500) {
  constexpr double invphi = 0.6180339887498948482;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(b - a) <= rel_tol * (std::abs(c) + std::abs(d)) + 1e-300) break;
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? MinimumResult{c, fc} : MinimumResult{d, fd};
}

}  // namespace ebsl
