#pragma once

// Special functions for the shape-1/2 Gamma family and the Normal/Laplace
// scale mixture.  Everything here is a pure function.

#include <cmath>
#include <numbers>
#include <string>

#include "ebsl/errors.hpp"

namespace ebsl::specfn {

namespace detail {

// exp(x*x) without losing the low bits of x*x.
inline double exp_square(double x) {
  const double hi = x * x;
  const double lo = std::fma(x, x, -hi);
  return std::exp(hi) * (1.0 + lo);
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
}

}  // namespace detail

/// Scaled complementary error function, erfcx(x) = exp(x^2) erfc(x).
inline double erfcx(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) {
    if (x < -26.6) return HUGE_VAL;
    return 2.0 * detail::exp_square(x) - erfcx(-x);
  }
  if (x < 26.0) return detail::exp_square(x) * std::erfc(x);
  // Asymptotic series; at x >= 26 consecutive terms shrink by < 1/(2x^2) ~ 7e-4.
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int n = 1; n < 12; ++n) {
    term *= -(2.0 * n - 1.0) * inv2x2;
    sum += term;
    if (std::abs(term) < 1e-18) break;
  }
  return sum / (x * std::sqrt(std::numbers::pi));
}

/// Upper tail of Ga(1/2, 1) beyond k, i.e. erfc(sqrt(k)).
inline double gamma_half_tail(double k) {
  detail::require_finite(k, "gamma_half_tail: k");
  if (k < 0.0) throw DomainError("gamma_half_tail: k must be >= 0");
  return std::erfc(std::sqrt(k));
}

/// log of gamma_half_tail, finite for every finite k >= 0.
inline double log_gamma_half_tail(double k) {
  detail::require_finite(k, "log_gamma_half_tail: k");
  if (k < 0.0) throw DomainError("log_gamma_half_tail: k must be >= 0");
  if (k < 1.0) return std::log(std::erfc(std::sqrt(k)));
  return std::log(erfcx(std::sqrt(k))) - k;
}

/// Hazard ratio Ga(k|1/2,1) / gamma_half_tail(k), evaluated as
/// 1 / (sqrt(pi k) erfcx(sqrt(k))).  Decreases from +inf (k -> 0) to 1.
inline double gamma_half_hazard(double k) {
  if (std::isnan(k) || k <= 0.0) throw DomainError("gamma_half_hazard: k must be > 0");
  if (std::isinf(k)) return 1.0;
  const double r = std::sqrt(k);
  return 1.0 / (std::sqrt(std::numbers::pi) * r * erfcx(r));
}

/// Density of Ga(1/2,1) truncated to (k, inf).
inline double tgamma_half_pdf(double gamma, double k) {
  detail::require_finite(k, "tgamma_half_pdf: k");
  if (k < 0.0) throw DomainError("tgamma_half_pdf: k must be >= 0");
  if (gamma <= k || gamma <= 0.0) return 0.0;
  // e^{-gamma} / tail(k) = e^{k - gamma} / erfcx(sqrt k)
  return std::exp(k - gamma) / (std::sqrt(std::numbers::pi * gamma) * erfcx(std::sqrt(k)));
}

/// log of  integral exp(-a1 x^2 - a2 |x|) dx  =  log[ sqrt(pi/a1) erfcx(a2 / (2 sqrt a1)) ].
inline double normal_laplace_logZ(double alpha1, double alpha2) {
  if (!(alpha1 > 0.0) || !std::isfinite(alpha1))
    throw DomainError("normal_laplace_logZ: alpha1 must be > 0");
  if (!(alpha2 >= 0.0) || !std::isfinite(alpha2))
    throw DomainError("normal_laplace_logZ: alpha2 must be >= 0");
  const double root_k = alpha2 / (2.0 * std::sqrt(alpha1));
  return 0.5 * std::log(std::numbers::pi / alpha1) + std::log(erfcx(root_k));
}

/// Truncation point k = alpha2^2 / (4 alpha1) of the Gamma mixing density.
inline double truncation_from_penalty(double alpha1, double alpha2) {
  if (!(alpha1 > 0.0)) throw DomainError("truncation_from_penalty: alpha1 must be > 0");
  return alpha2 * alpha2 / (4.0 * alpha1);
}

struct QuadratureSpec {
  int node_count = 256;
  double domain_cap = 50.0;  // upper limit standing in for +inf

  void validate(double lower) const {
    if (node_count < 64) throw DomainError("QuadratureSpec: node_count must be >= 64");
    if (!std::isfinite(domain_cap) || !(domain_cap > lower))
      throw DomainError("QuadratureSpec: domain_cap must be finite and above the lower limit");
  }

  /// Default rule for mixture integrals truncated at k: cap at k + 50.
  static QuadratureSpec for_truncation(double k, int nodes = 256) { return {nodes, k + 50.0}; }
};

/// Fixed-node tanh-sinh rule on [a, b].
template <typename F>
double integrate_tanh_sinh(F&& f, double a, double b, int node_count) {
  if (!(b > a)) throw DomainError("integrate_tanh_sinh: empty interval");
  constexpr double t_max = 3.2;
  const double h = 2.0 * t_max / (node_count - 1);
  const double half = 0.5 * (b - a);
  const double c = 0.5 * std::numbers::pi;
  double sum = 0.0;
  for (int j = 0; j < node_count; ++j) {
    const double t = -t_max + j * h;
    const double u = c * std::sinh(t);
    const double ch = std::cosh(u);
    const double w = c * std::cosh(t) / (ch * ch);
    // 1 - tanh(u) without cancellation near the endpoints.
    const double e = std::exp(-2.0 * std::abs(u));
    const double one_minus = 2.0 * e / (1.0 + e);
    const double x = t < 0 ? a + half * one_minus : b - half * one_minus;
    if (x <= a || x >= b) continue;
    const double fx = f(x);
    if (!std::isfinite(fx)) throw NumericError("integrate_tanh_sinh: non-finite integrand");
    sum += w * fx;
  }
  return sum * half * h;
}

/// Numerical value of  int N(x | 0, Lambda(g)) TGa(g | 1/2, 1, (k, inf)) dg  with
/// Lambda(g) = (1 - k/g) / (2 alpha1).  Evaluated after the substitution g = k + s^2,
/// which turns the integrand into exp(-s^2 - alpha1 x^2 (k + s^2) / s^2) up to a constant.
/// Meant as an oracle for the Normal/Laplace mixture identity, not for solver paths.
inline double scale_mixture_density(double x, double alpha1, double k, const QuadratureSpec& quad) {
  if (!(alpha1 > 0.0)) throw DomainError("scale_mixture_density: alpha1 must be > 0");
  if (!(k >= 0.0) || !std::isfinite(k)) throw DomainError("scale_mixture_density: k must be >= 0");
  quad.validate(k);
  const double x2 = x * x;
  const double scale = 2.0 * std::sqrt(alpha1) / (std::numbers::pi * erfcx(std::sqrt(k)));
  auto integrand = [&](double s) {
    const double s2 = s * s;
    return std::exp(-s2 - alpha1 * x2 * (k + s2) / s2);
  };
  const double upper = std::sqrt(quad.domain_cap - k);
  const double value = scale * integrate_tanh_sinh(integrand, 0.0, upper, quad.node_count);
  if (!std::isfinite(value)) throw NumericError("scale_mixture_density: non-finite result");
  return value;
}

}  // namespace ebsl::specfn
