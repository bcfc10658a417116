#pragma once

// Negative log-posterior of the hyperparameters, reported up to additive
// constants that do not depend on any optimized quantity.  Dropped constants:
//   (N/2) log 2pi and (S/2) log 2pi from the two Gaussians,
//   S log Gamma(1/2) per column from the Gamma densities,
//   log Gamma(tau + 1) - (tau + 1) log nu from the Gamma prior on k,
//   the alpha-independent part of the MXN hyperprior normalizer.
//
// Per column t:
//   L_t = (N/2) log beta + |v - K mu|^2 / (2 beta)          data / logdet
//       + (1/2) log det(I + diag(Lambda) K^T K / beta)       logdet
//       + (1/2) mu^T diag(Lambda)^{-1} mu                    prior_quadratic
//       + hyperprior branch                                   hyperprior

#include <cmath>
#include <limits>
#include <sstream>

#include "ebsl/errors.hpp"
#include "ebsl/posterior.hpp"
#include "ebsl/problem.hpp"
#include "ebsl/specfn.hpp"

namespace ebsl {

struct ObjectiveBreakdown {
  double data_fit = 0.0;
  double logdet = 0.0;
  double prior_quadratic = 0.0;
  double hyperprior = 0.0;
  double total = 0.0;

  ObjectiveBreakdown& operator+=(const ObjectiveBreakdown& o) {
    data_fit += o.data_fit;
    logdet += o.logdet;
    prior_quadratic += o.prior_quadratic;
    hyperprior += o.hyperprior;
    total += o.total;
    return *this;
  }
};

/// Upper end of the effective-variance factor; keeps gamma = k / (1 - lambda_bar) finite.
inline constexpr double kLambdaBarCap = 1.0 - 1e-12;

/// Effective prior variances Lambda = lambda_bar / (2 scale).
inline Vector effective_variances(const Vector& lambda_bar, double scale) {
  return lambda_bar / (2.0 * scale);
}

/// W^{-1} delta for W = ones(S,S) - I, using W^{-1} = ones/(S-1) - I.
inline Vector w_inverse_apply(const Vector& delta) {
  const Eigen::Index S = delta.size();
  if (S < 2) throw DomainError("w_inverse_apply: requires S >= 2");
  return Vector::Constant(S, delta.sum() / static_cast<double>(S - 1)) - delta;
}

inline double w_inverse_l1_squared(const Vector& delta) {
  const double l1 = w_inverse_apply(delta).lpNorm<1>();
  return l1 * l1;
}

namespace detail {

inline void check_lambda_bar(const Vector& lambda_bar, const char* who) {
  for (Eigen::Index i = 0; i < lambda_bar.size(); ++i) {
    const double lb = lambda_bar(i);
    if (!(lb >= 0.0) || !(lb < 1.0)) {
      std::ostringstream os;
      os << who << ": lambda_bar[" << i << "] = " << lb << " outside [0, 1)";
      throw DomainError(os.str());
    }
  }
}

inline double prior_quadratic(const Vector& mu, const Vector& lambda) {
  double q = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (lambda(i) > 0.0) {
      q += mu(i) * mu(i) / lambda(i);
    } else if (mu(i) != 0.0) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return 0.5 * q;
}

/// log tail(k) + (1/2) log gamma + gamma with gamma = k / (1 - lambda_bar): the
/// -log TGa(gamma | 1/2, 1, (k, inf)) contribution of one coordinate (k > 0).
inline double truncated_gamma_term(double k, double lambda_bar) {
  const double gamma = k / (1.0 - lambda_bar);
  return specfn::log_gamma_half_tail(k) + 0.5 * std::log(gamma) + gamma;
}

inline ObjectiveBreakdown common_terms(const Matrix& K, const Vector& v, const Vector& mu,
                                       const Vector& lambda, double beta, double logdet_term) {
  ObjectiveBreakdown b;
  const double resid = (v - K * mu).squaredNorm();
  b.data_fit = resid / (2.0 * beta);
  b.logdet = 0.5 * static_cast<double>(K.rows()) * std::log(beta) + 0.5 * logdet_term;
  b.prior_quadratic = prior_quadratic(mu, lambda);
  return b;
}

}  // namespace detail

/// Hyperprior of the ENET branch for one column:
///   S log tail(k) + sum_i [ (1/2) log gamma_i + gamma_i ] - tau log k + nu k.
inline double enet_hyperprior(const Vector& lambda_bar, double k, double tau, double nu) {
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("enet_hyperprior: k must be > 0");
  double h = 0.0;
  for (Eigen::Index i = 0; i < lambda_bar.size(); ++i) h += detail::truncated_gamma_term(k, lambda_bar(i));
  return h - tau * std::log(k) + nu * k;
}

/// Hyperprior of the MXN branch for one column.  Coordinates with delta_i = 0
/// carry an untruncated mixing density that integrates out, so they add nothing.
///   sum_{delta_i>0} [ log tail(a d_i^2) + (1/2) log gamma_i + gamma_i ]
///   + alpha |W^{-1} delta|_1^2 - (S/2) log alpha
inline double mxn_hyperprior(const Vector& lambda_bar, const Vector& delta, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("mxn_hyperprior: alpha must be > 0");
  double h = 0.0;
  for (Eigen::Index i = 0; i < lambda_bar.size(); ++i) {
    if (delta(i) < 0.0) throw DomainError("mxn_hyperprior: delta must be >= 0");
    if (delta(i) > 0.0) h += detail::truncated_gamma_term(alpha * delta(i) * delta(i), lambda_bar(i));
  }
  const double S = static_cast<double>(lambda_bar.size());
  return h + alpha * w_inverse_l1_squared(delta) - 0.5 * S * std::log(alpha);
}

/// ENET objective of one column with a caller-supplied log-determinant term
/// (lets oracles substitute a linearized determinant).
inline ObjectiveBreakdown enet_column_objective(const Matrix& K, const Vector& v, const Vector& mu,
                                                const Vector& lambda_bar, double alpha1, double k,
                                                double beta, double tau, double nu, double logdet_term) {
  detail::check_lambda_bar(lambda_bar, "enet_column_objective");
  if (!(alpha1 > 0.0)) throw DomainError("enet_column_objective: alpha1 must be > 0");
  if (!(beta > 0.0)) throw DomainError("enet_column_objective: beta must be > 0");
  ObjectiveBreakdown b =
      detail::common_terms(K, v, mu, effective_variances(lambda_bar, alpha1), beta, logdet_term);
  b.hyperprior = enet_hyperprior(lambda_bar, k, tau, nu);
  b.total = b.data_fit + b.logdet + b.prior_quadratic + b.hyperprior;
  return b;
}

inline ObjectiveBreakdown enet_column_objective(const Matrix& K, const LeadFieldSVD& svd, const Vector& v,
                                                const Vector& mu, const Vector& lambda_bar, double alpha1,
                                                double k, double beta, double tau, double nu) {
  detail::check_lambda_bar(lambda_bar, "enet_column_objective");
  const double logdet = posterior_logdet_term(svd, effective_variances(lambda_bar, alpha1), beta);
  return enet_column_objective(K, v, mu, lambda_bar, alpha1, k, beta, tau, nu, logdet);
}

inline ObjectiveBreakdown mxn_column_objective(const Matrix& K, const Vector& v, const Vector& mu,
                                               const Vector& lambda_bar, const Vector& delta, double alpha,
                                               double beta, double logdet_term) {
  detail::check_lambda_bar(lambda_bar, "mxn_column_objective");
  if (!(beta > 0.0)) throw DomainError("mxn_column_objective: beta must be > 0");
  ObjectiveBreakdown b =
      detail::common_terms(K, v, mu, effective_variances(lambda_bar, alpha), beta, logdet_term);
  b.hyperprior = mxn_hyperprior(lambda_bar, delta, alpha);
  b.total = b.data_fit + b.logdet + b.prior_quadratic + b.hyperprior;
  return b;
}

inline ObjectiveBreakdown mxn_column_objective(const Matrix& K, const LeadFieldSVD& svd, const Vector& v,
                                               const Vector& mu, const Vector& lambda_bar, const Vector& delta,
                                               double alpha, double beta) {
  detail::check_lambda_bar(lambda_bar, "mxn_column_objective");
  const double logdet = posterior_logdet_term(svd, effective_variances(lambda_bar, alpha), beta);
  return mxn_column_objective(K, v, mu, lambda_bar, delta, alpha, beta, logdet);
}

/// Sum of the ENET objective over all columns.  alpha1, k, beta are T-vectors.
inline ObjectiveBreakdown neg_log_posterior_enet(const ProblemData& data, const LeadFieldSVD& svd,
                                                 const Matrix& mu, const Matrix& lambda_bar,
                                                 const Vector& alpha1, const Vector& k, const Vector& beta,
                                                 double tau, double nu) {
  ObjectiveBreakdown total;
  for (Eigen::Index t = 0; t < data.samples(); ++t) {
    total += enet_column_objective(data.K, svd, data.V.col(t), mu.col(t), lambda_bar.col(t), alpha1(t), k(t),
                                   beta(t), tau, nu);
  }
  return total;
}

inline ObjectiveBreakdown neg_log_posterior_mxn(const ProblemData& data, const LeadFieldSVD& svd,
                                                const Matrix& mu, const Matrix& lambda_bar, const Matrix& delta,
                                                double alpha, const Vector& beta) {
  ObjectiveBreakdown total;
  for (Eigen::Index t = 0; t < data.samples(); ++t) {
    total += mxn_column_objective(data.K, svd, data.V.col(t), mu.col(t), lambda_bar.col(t), delta.col(t),
                                  alpha, beta(t));
  }
  return total;
}

/// First-order expansion of log|Sigma^{-1}| around a reference state, in the
/// variables 1/Lambda_i and log beta.  log|Sigma^{-1}| is concave in 1/Lambda,
/// so in those variables the expansion majorizes it.  The closed-form updates
/// of lambda_bar, alpha1, alpha and beta are exact stationary points of the
/// objective with the log-determinant replaced by this expansion.
struct LogDetTangent {
  double log_precision_ref = 0.0;  // log|Sigma^{-1}| at the reference
  Vector sigma_ref;
  Vector lambda_ref;
  double beta_ref = 1.0;

  static LogDetTangent at(const PosteriorMoments& post, const Vector& lambda, double beta) {
    if ((lambda.array() <= 0.0).any()) throw DomainError("LogDetTangent: lambda must be > 0");
    return {post.logdet_term - lambda.array().log().sum(), post.sigma_diag, lambda, beta};
  }

  /// Linearized log det(I + diag(Lambda) K^T K / beta) = tangent(log|Sigma^{-1}|) + sum log Lambda.
  double logdet_term(const Vector& lambda, double beta) const {
    double lin = log_precision_ref;
    double trace_ratio = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      lin += sigma_ref(i) * (1.0 / lambda(i) - 1.0 / lambda_ref(i));
      trace_ratio += sigma_ref(i) / lambda_ref(i);
    }
    const double S = static_cast<double>(lambda.size());
    lin -= (S - trace_ratio) * (std::log(beta) - std::log(beta_ref));
    return lin + lambda.array().log().sum();
  }
};

}  // namespace ebsl
