#pragma once

// Column objectives with the posterior mean held fixed and the
// log-determinant replaced by its tangent at the reference prior.  Every
// closed-form hyperparameter update is an exact coordinate minimum of these,
// which is what the stationarity checks probe.

#include <algorithm>
#include <cmath>
#include <random>

#include "ebsl/enet_rvm.hpp"
#include "ebsl/mxn_rvm.hpp"
#include "oracles.hpp"

namespace surrogate {

using ebsl::Matrix;
using ebsl::Vector;

struct Enet {
  Matrix K;
  Vector v;
  ebsl::PosteriorMoments post;
  ebsl::LogDetTangent tangent;
  double tau = 0.0, nu = 0.0;
  // reference point the posterior was computed at
  Vector lb;
  double alpha1 = 1.0, k = 1.0, beta = 1.0;

  double operator()(const Vector& lbar, double a1, double kk, double b) const {
    const double logdet = tangent.logdet_term(ebsl::effective_variances(lbar, a1), b);
    return ebsl::enet_column_objective(K, v, post.mu, lbar, a1, kk, b, tau, nu, logdet).total;
  }
};

inline Enet random_enet(std::mt19937_64& rng, Eigen::Index N = 8, Eigen::Index S = 20) {
  Enet s;
  s.K = oracle::random_matrix(rng, N, S);
  s.v = oracle::random_matrix(rng, N, 1);
  s.lb = Vector(S);
  for (Eigen::Index i = 0; i < S; ++i) s.lb(i) = oracle::uniform(rng, 0.05, 0.95);
  s.alpha1 = oracle::log_uniform(rng, 1, 0.2, 5.0)(0);
  s.k = oracle::log_uniform(rng, 1, 0.1, 30.0)(0);
  s.beta = oracle::log_uniform(rng, 1, 0.3, 3.0)(0);
  s.tau = static_cast<double>(S);
  s.nu = 0.01 * static_cast<double>(S);
  const Vector lambda = ebsl::effective_variances(s.lb, s.alpha1);
  s.post = ebsl::posterior_moments(ebsl::svd_decompose(s.K), lambda, s.beta, s.v);
  s.tangent = ebsl::LogDetTangent::at(s.post, lambda, s.beta);
  return s;
}

/// MXN objective summed over columns, alpha shared.
struct Mxn {
  Matrix K;
  Matrix V;
  Matrix lb, delta, mu, sigma;
  std::vector<ebsl::LogDetTangent> tangents;
  double alpha = 1.0, beta = 1.0;

  double column(Eigen::Index t, const Vector& lbar, double a, double b) const {
    const double logdet = tangents[static_cast<std::size_t>(t)].logdet_term(ebsl::effective_variances(lbar, a), b);
    return ebsl::mxn_column_objective(K, V.col(t), mu.col(t), lbar, delta.col(t), a, b, logdet).total;
  }
  double total(double a) const {
    double L = 0.0;
    for (Eigen::Index t = 0; t < V.cols(); ++t) L += column(t, lb.col(t), a, beta);
    return L;
  }
};

inline Mxn random_mxn(std::mt19937_64& rng, Eigen::Index N = 6, Eigen::Index S = 12, Eigen::Index T = 3) {
  Mxn s;
  s.K = oracle::random_matrix(rng, N, S);
  s.V = oracle::random_matrix(rng, N, T);
  s.lb.resize(S, T);
  s.delta.resize(S, T);
  s.mu.resize(S, T);
  s.sigma.resize(S, T);
  s.alpha = oracle::log_uniform(rng, 1, 0.2, 5.0)(0);
  s.beta = oracle::log_uniform(rng, 1, 0.3, 3.0)(0);
  const ebsl::LeadFieldSVD svd = ebsl::svd_decompose(s.K);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index i = 0; i < S; ++i) s.lb(i, t) = oracle::uniform(rng, 0.1, 0.9);
    const Vector lambda = ebsl::effective_variances(s.lb.col(t), s.alpha);
    const ebsl::PosteriorMoments p = ebsl::posterior_moments(svd, lambda, s.beta, s.V.col(t));
    s.mu.col(t) = p.mu;
    s.sigma.col(t) = p.sigma_diag;
    s.delta.col(t) = ebsl::update_delta(p.mu);
    s.tangents.push_back(ebsl::LogDetTangent::at(p, lambda, s.beta));
  }
  return s;
}

/// Relative improvement a golden-section search over log(x) finds near x0.
template <typename F>
double golden_gain(F f, double x0, double span = 4.0) {
  const double here = f(x0);
  const ebsl::MinimumResult m = ebsl::golden_section([&](double u) { return f(std::exp(u)); }, std::log(x0) - span,
                                                     std::log(x0) + span, 1e-14);
  return (here - std::min(here, m.value)) / std::abs(here);
}

/// Same on a bounded interval, for lambda_bar in (0, 1).
template <typename F>
double golden_gain_unit(F f, double x0) {
  const double here = f(x0);
  const ebsl::MinimumResult m = ebsl::golden_section(f, 1e-9, ebsl::kLambdaBarCap, 1e-15);
  return (here - std::min(here, m.value)) / std::abs(here);
}

}  // namespace surrogate
