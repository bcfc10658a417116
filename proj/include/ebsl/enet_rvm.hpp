#pragma once

// Elastic-net relevance vector machine: empirical-Bayes coordinate descent
// over (mu, lambda_bar, alpha1, k, beta), one column of V at a time.

#include <cmath>
#include <limits>
#include <sstream>

#include "ebsl/errors.hpp"
#include "ebsl/objective.hpp"
#include "ebsl/parallel.hpp"
#include "ebsl/posterior.hpp"
#include "ebsl/scalar_search.hpp"
#include "ebsl/solver_types.hpp"
#include "ebsl/specfn.hpp"

namespace ebsl {

/// Stationary lambda_bar of one coordinate.  With c = mu^2 + Sigma_ii, the
/// derivative condition factors as (eta + k)(eta^2 + eta/2 - c alpha1 k) = 0
/// under lambda_bar = eta / (eta + k), so
///   eta = -1/4 + sqrt(1/16 + c alpha1 k).
inline double update_lambda_bar_enet(double mu_i, double sigma_ii, double alpha1, double k) {
  if (!(sigma_ii >= 0.0)) throw DomainError("update_lambda_bar_enet: sigma_ii must be >= 0");
  if (!(alpha1 > 0.0)) throw DomainError("update_lambda_bar_enet: alpha1 must be > 0");
  if (!(k >= 0.0)) throw DomainError("update_lambda_bar_enet: k must be >= 0");
  const double c = mu_i * mu_i + sigma_ii;
  if (c == 0.0) return 0.0;
  if (k == 0.0) return kLambdaBarCap;
  const double x = c * alpha1 * k;
  const double eta = x / (0.25 + std::sqrt(0.0625 + x));  // same root, no cancellation
  const double lb = eta / (eta + k);
  return std::min(lb, kLambdaBarCap);
}

/// alpha1 = (S/2) / sum_i (mu_i^2 + Sigma_ii) / lambda_bar_i.
inline double update_alpha1(const Vector& mu, const Vector& sigma_diag, const Vector& lambda_bar) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double c = mu(i) * mu(i) + sigma_diag(i);
    if (lambda_bar(i) > 0.0) {
      sum += c / lambda_bar(i);
    } else if (c > 0.0) {
      return std::numeric_limits<double>::min();
    }
  }
  if (!(sum > 0.0)) throw DegenerateError("update_alpha1: every coordinate is pruned");
  return 0.5 * static_cast<double>(mu.size()) / sum;
}

/// F(k) = sum_i 1/(1 - lambda_bar_i) + nu - (tau - S/2)/k - S hazard(k).
inline double enet_k_gradient(const Vector& lambda_bar, double tau, double nu, double k) {
  const double S = static_cast<double>(lambda_bar.size());
  const double spread = (1.0 / (1.0 - lambda_bar.array())).sum();
  return spread + nu - (tau - 0.5 * S) / k - S * specfn::gamma_half_hazard(k);
}

inline RootResult solve_k(const Vector& lambda_bar, double tau, double nu) {
  return bisect_positive([&](double k) { return enet_k_gradient(lambda_bar, tau, nu, k); });
}

inline double update_k(const Vector& lambda_bar, double tau, double nu) {
  for (Eigen::Index i = 0; i < lambda_bar.size(); ++i)
    if (!(lambda_bar(i) >= 0.0 && lambda_bar(i) < 1.0)) throw DomainError("update_k: lambda_bar outside [0,1)");
  return solve_k(lambda_bar, tau, nu).root;
}

/// beta = |v - K mu|^2 / (N + sum_i Sigma_ii / Lambda_i - S), with Lambda the
/// prior Sigma was computed under (the denominator is then N minus the
/// effective number of parameters, always > 0).  Pruned coordinates use the
/// limit Sigma_ii / Lambda_i -> 1.
inline double update_beta(const Vector& v, const Matrix& K, const Vector& mu, const Vector& sigma_diag,
                          const Vector& lambda_bar, double scale, BetaMode mode) {
  if (mode == BetaMode::fixed_one) return 1.0;
  const double resid = (v - K * mu).squaredNorm();
  double ratio_sum = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    ratio_sum += lambda_bar(i) > 0.0 ? 2.0 * scale * sigma_diag(i) / lambda_bar(i) : 1.0;
  const double denom = static_cast<double>(K.rows()) + ratio_sum - static_cast<double>(mu.size());
  if (!(denom > 0.0)) {
    std::ostringstream os;
    os << "update_beta: non-positive denominator " << denom;
    throw NumericError(os.str());
  }
  return std::max(resid / denom, 1e-12);
}

inline double update_beta_enet(const Vector& v, const Matrix& K, const Vector& mu, const Vector& sigma_diag,
                               const Vector& lambda_bar, double alpha1, BetaMode mode = BetaMode::learned) {
  return update_beta(v, K, mu, sigma_diag, lambda_bar, alpha1, mode);
}

namespace detail {

struct EnetColumnResult {
  Vector mu;
  Vector sigma_diag;
  Vector lambda_bar;
  std::vector<double> objective;
  std::vector<double> alpha1, k, beta;
  bool converged = false;
};

inline EnetColumnResult solve_enet_column(const ProblemData& data, const LeadFieldSVD& svd, Eigen::Index t,
                                          const SolverConfig& cfg, double tau, double nu) {
  const Eigen::Index S = data.sources();
  const Vector v = data.V.col(t);
  EnetColumnResult res;
  res.lambda_bar = Vector::Constant(S, cfg.lambda_bar_init);
  double alpha1 = 1.0;
  double k = 1.0;
  double beta = 1.0;
  if (cfg.fixed_hyper) {
    alpha1 = cfg.fixed_hyper->alpha1;
    k = specfn::truncation_from_penalty(cfg.fixed_hyper->alpha1, cfg.fixed_hyper->alpha2);
  }

  if (v.cwiseAbs().maxCoeff() == 0.0) {
    // Nothing to explain: the column is fully sparse.
    res.mu = Vector::Zero(S);
    res.sigma_diag = Vector::Zero(S);
    res.lambda_bar.setZero();
    res.objective.push_back(0.0);
    res.alpha1.push_back(alpha1);
    res.k.push_back(k);
    res.beta.push_back(beta);
    res.converged = true;
    return res;
  }

  if (cfg.learns_alpha1()) {
    const double ridge_lambda = cfg.ridge_init_rel * svd.singular(0) * svd.singular(0);
    const double energy = ridge_column(svd, v, ridge_lambda).squaredNorm();
    if (energy > 0.0) alpha1 = 0.5 * static_cast<double>(S) / energy;
  }

  Vector mu_prev;
  int iter = 0;
  auto fail = [&](const char* op, const std::exception& e) -> SolverError {
    return SolverError(static_cast<long>(t), iter, op, e.what());
  };

  for (iter = 1; iter <= cfg.max_iter; ++iter) {
    const Vector lambda = effective_variances(res.lambda_bar, alpha1);
    PosteriorMoments post;
    double L = 0.0;
    try {
      post = posterior_moments(svd, lambda, beta, v);
      L = enet_column_objective(data.K, v, post.mu, res.lambda_bar, alpha1, k, beta, tau, nu, post.logdet_term)
              .total;
    } catch (const Error& e) {
      throw fail("posterior", e);
    }
    res.objective.push_back(L);
    res.alpha1.push_back(alpha1);
    res.k.push_back(k);
    res.beta.push_back(beta);
    res.mu = post.mu;
    res.sigma_diag = post.sigma_diag;

    if (iter > 1) {
      const double dL = std::abs(L - res.objective[res.objective.size() - 2]);
      if (relative_change(post.mu, mu_prev) <= cfg.tol_mu && dL <= cfg.tol_L * std::max(std::abs(L), 1.0)) {
        res.converged = true;
        break;
      }
    }
    if (iter == cfg.max_iter) break;
    mu_prev = post.mu;

    // beta pairs Sigma with the prior it was computed from, so it goes first
    try {
      beta = update_beta(v, data.K, post.mu, post.sigma_diag, res.lambda_bar, alpha1, cfg.beta_mode);
    } catch (const Error& e) {
      throw fail("update_beta", e);
    }
    try {
      for (Eigen::Index i = 0; i < S; ++i)
        res.lambda_bar(i) = update_lambda_bar_enet(post.mu(i), post.sigma_diag(i), alpha1, k);
    } catch (const Error& e) {
      throw fail("update_lambda_bar", e);
    }
    if (cfg.learns_alpha1()) {
      try {
        alpha1 = update_alpha1(post.mu, post.sigma_diag, res.lambda_bar);
      } catch (const DegenerateError&) {
        // fully pruned column; keep the current scale and let the posterior settle
      } catch (const Error& e) {
        throw fail("update_alpha1", e);
      }
    }
    if (cfg.learns_k()) {
      try {
        k = update_k(res.lambda_bar, tau, nu);
      } catch (const Error& e) {
        throw fail("update_k", e);
      }
    }
  }
  return res;
}

}  // namespace detail

/// Runs the ENET-RVM on every column of V.  Columns are independent and may
/// be solved concurrently (cfg.jobs); results do not depend on scheduling.
inline Solution solve_enet(const ProblemData& data, const SolverConfig& cfg) {
  data.validate();
  cfg.validate();
  const LeadFieldSVD svd = svd_decompose(data, cfg.rank_tol);
  const Eigen::Index S = data.sources();
  const Eigen::Index T = data.samples();
  const double tau = cfg.tau.value_or(static_cast<double>(S));
  const double nu = cfg.epsilon_prior * static_cast<double>(S);

  std::vector<detail::EnetColumnResult> cols(static_cast<std::size_t>(T));
  parallel_for(static_cast<std::size_t>(T), cfg.jobs, [&](std::size_t t) {
    cols[t] = detail::solve_enet_column(data, svd, static_cast<Eigen::Index>(t), cfg, tau, nu);
  });

  Solution sol;
  sol.mu.resize(S, T);
  sol.sigma_diag.resize(S, T);
  EnetHyperState state;
  state.lambda_bar.resize(S, T);
  state.alpha1.resize(T);
  state.k.resize(T);
  state.beta.resize(T);
  state.tau = tau;
  state.nu = nu;
  std::size_t longest = 0;
  sol.converged = true;
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& c = cols[static_cast<std::size_t>(t)];
    sol.mu.col(t) = c.mu;
    sol.sigma_diag.col(t) = c.sigma_diag;
    state.lambda_bar.col(t) = c.lambda_bar;
    state.alpha1(t) = c.alpha1.back();
    state.k(t) = c.k.back();
    state.beta(t) = c.beta.back();
    longest = std::max(longest, c.objective.size());
    sol.converged = sol.converged && c.converged;
    sol.column_iterations.push_back(static_cast<int>(c.objective.size()));
  }
  // Columns that stopped early contribute their final values to later iterations.
  for (std::size_t m = 0; m < longest; ++m) {
    HyperRecord rec;
    rec.alpha1.resize(T);
    rec.k.resize(T);
    rec.beta.resize(T);
    double total = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto& c = cols[static_cast<std::size_t>(t)];
      const std::size_t j = std::min(m, c.objective.size() - 1);
      total += c.objective[j];
      rec.alpha1(t) = c.alpha1[j];
      rec.k(t) = c.k[j];
      rec.beta(t) = c.beta[j];
    }
    sol.objective_trace.push_back(total);
    sol.hyper_trace.push_back(std::move(rec));
  }
  sol.iterations = static_cast<int>(longest);
  sol.enet = std::move(state);
  return sol;
}

}  // namespace ebsl
