#pragma once

// Mixed-norm (Elitist LASSO) relevance vector machine.  Each column carries
// its own lambda_bar, delta and beta; a single alpha is shared by the whole
// map and is updated once per sweep, after every column has moved.

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "ebsl/enet_rvm.hpp"
#include "ebsl/errors.hpp"
#include "ebsl/objective.hpp"
#include "ebsl/parallel.hpp"
#include "ebsl/posterior.hpp"
#include "ebsl/scalar_search.hpp"
#include "ebsl/solver_types.hpp"
#include "ebsl/specfn.hpp"

namespace ebsl {

/// The ENET update with alpha1 := alpha and k := alpha delta^2.
inline double update_lambda_bar_mxn(double mu_i, double sigma_ii, double alpha, double delta_i) {
  if (!(delta_i >= 0.0)) throw DomainError("update_lambda_bar_mxn: delta must be >= 0");
  return update_lambda_bar_enet(mu_i, sigma_ii, alpha, alpha * delta_i * delta_i);
}

/// delta_i = sum_{k != i} |mu_k|.
inline Vector update_delta(const Vector& mu) {
  const Vector a = mu.cwiseAbs();
  return Vector::Constant(mu.size(), a.sum()) - a;
}

/// Derivative in alpha of the (linearized) objective summed over columns:
///   sum (mu^2 + Sigma)/lambda_bar + sum delta^2/(1 - lambda_bar) + sum_t |W^{-1} delta_t|_1^2
///   - (2ST - A)/(2 alpha) - sum delta^2 hazard(alpha delta^2),
/// A = number of cells with delta > 0.  Cells with delta = 0 carry no Gamma term.
inline double mxn_alpha_gradient(const Matrix& mu, const Matrix& sigma_diag, const Matrix& lambda_bar,
                                 const Matrix& delta, double alpha) {
  double f = 0.0;
  double active = 0.0;
  for (Eigen::Index t = 0; t < mu.cols(); ++t) {
    for (Eigen::Index i = 0; i < mu.rows(); ++i) {
      const double c = mu(i, t) * mu(i, t) + sigma_diag(i, t);
      const double lb = lambda_bar(i, t);
      if (lb > 0.0) f += c / lb;
      const double d = delta(i, t);
      if (d > 0.0) {
        const double d2 = d * d;
        f += d2 / (1.0 - lb) - d2 * specfn::gamma_half_hazard(alpha * d2);
        active += 1.0;
      }
    }
    f += w_inverse_l1_squared(delta.col(t));
  }
  const double ST = static_cast<double>(mu.size());
  return f - (2.0 * ST - active) / (2.0 * alpha);
}

/// The alpha-dependent part of the linearized objective; its derivative is
/// mxn_alpha_gradient.  Used by the grid fallback and by the tests.
inline double mxn_alpha_objective(const Matrix& mu, const Matrix& sigma_diag, const Matrix& lambda_bar,
                                  const Matrix& delta, double alpha) {
  double g = 0.0;
  for (Eigen::Index t = 0; t < mu.cols(); ++t) {
    for (Eigen::Index i = 0; i < mu.rows(); ++i) {
      const double lb = lambda_bar(i, t);
      if (lb > 0.0) g += alpha * (mu(i, t) * mu(i, t) + sigma_diag(i, t)) / lb;
      const double d = delta(i, t);
      if (d > 0.0) g += specfn::log_gamma_half_tail(alpha * d * d) + 0.5 * std::log(alpha) + alpha * d * d / (1.0 - lb);
    }
    g += alpha * w_inverse_l1_squared(delta.col(t));
  }
  return g - static_cast<double>(mu.size()) * std::log(alpha);
}

struct AlphaUpdate {
  double alpha = 1.0;
  RootResult bracket;
  bool fallback = false;
  std::string warning;
};

inline AlphaUpdate update_alpha_mxn(const Matrix& mu, const Matrix& sigma_diag, const Matrix& lambda_bar,
                                    const Matrix& delta) {
  if (mu.rows() < 2) throw DomainError("update_alpha_mxn: requires S >= 2");
  if ((delta.array() < 0.0).any()) throw DomainError("update_alpha_mxn: delta must be >= 0");
  AlphaUpdate out;
  try {
    out.bracket = bisect_positive(
        [&](double a) { return mxn_alpha_gradient(mu, sigma_diag, lambda_bar, delta, a); });
    out.alpha = out.bracket.root;
    return out;
  } catch (const RootNotFound& e) {
    // log-spaced grid over the default bracket, keep the smallest objective
    double best = HUGE_VAL;
    for (int j = 0; j <= 400; ++j) {
      const double a = std::pow(10.0, -10.0 + 0.05 * j);
      const double g = mxn_alpha_objective(mu, sigma_diag, lambda_bar, delta, a);
      if (g < best) {
        best = g;
        out.alpha = a;
      }
    }
    out.fallback = true;
    std::ostringstream os;
    os << "alpha update: " << e.what() << "; grid minimizer " << out.alpha << " used";
    out.warning = os.str();
    return out;
  }
}

namespace detail {

struct MxnColumnStep {
  Vector mu;
  Vector sigma_diag;
  double objective = 0.0;
};

}  // namespace detail

/// Runs the MXN-RVM on the whole map.  Requires at least two sources.
inline Solution solve_mxn(const ProblemData& data, const SolverConfig& cfg) {
  data.validate();
  cfg.validate();
  const Eigen::Index S = data.sources();
  const Eigen::Index T = data.samples();
  if (S < 2) throw DomainError("solve_mxn: requires at least two sources");
  const LeadFieldSVD svd = svd_decompose(data, cfg.rank_tol);

  MxnHyperState st;
  st.lambda_bar = Matrix::Constant(S, T, cfg.lambda_bar_init);
  st.delta = Matrix::Zero(S, T);
  st.alpha = cfg.fixed_alpha.value_or(cfg.alpha_init);
  st.beta = Vector::Ones(T);

  Solution sol;
  sol.mu = Matrix::Zero(S, T);
  sol.sigma_diag = Matrix::Zero(S, T);

  if (data.V.cwiseAbs().maxCoeff() == 0.0) {
    st.lambda_bar.setZero();
    HyperRecord rec;
    rec.alpha = st.alpha;
    rec.beta = st.beta;
    sol.hyper_trace.push_back(rec);
    sol.objective_trace.push_back(0.0);
    sol.iterations = 1;
    sol.converged = true;
    sol.column_iterations.assign(static_cast<std::size_t>(T), 1);
    sol.mxn = std::move(st);
    return sol;
  }

  {
    const double ridge_lambda = cfg.ridge_init_rel * svd.singular(0) * svd.singular(0);
    for (Eigen::Index t = 0; t < T; ++t) st.delta.col(t) = update_delta(detail::ridge_column(svd, data.V.col(t), ridge_lambda));
  }

  Matrix mu_prev;
  std::vector<detail::MxnColumnStep> steps(static_cast<std::size_t>(T));
  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    const double alpha = st.alpha;
    parallel_for(static_cast<std::size_t>(T), cfg.jobs, [&](std::size_t tt) {
      const auto t = static_cast<Eigen::Index>(tt);
      const Vector v = data.V.col(t);
      auto& step = steps[tt];
      PosteriorMoments post;
      try {
        post = posterior_moments(svd, effective_variances(st.lambda_bar.col(t), alpha), st.beta(t), v);
        step.objective = mxn_column_objective(data.K, v, post.mu, st.lambda_bar.col(t), st.delta.col(t), alpha,
                                              st.beta(t), post.logdet_term)
                             .total;
      } catch (const Error& e) {
        throw SolverError(static_cast<long>(t), iter, "posterior", e.what());
      }
      step.mu = std::move(post.mu);
      step.sigma_diag = std::move(post.sigma_diag);
    });

    // Fixed-order reduction keeps the trace independent of scheduling.
    double L = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto& step = steps[static_cast<std::size_t>(t)];
      sol.mu.col(t) = step.mu;
      sol.sigma_diag.col(t) = step.sigma_diag;
      L += step.objective;
    }
    sol.objective_trace.push_back(L);
    HyperRecord rec;
    rec.alpha = alpha;
    rec.beta = st.beta;
    rec.delta_mean = st.delta.mean();
    rec.delta_max = st.delta.maxCoeff();
    sol.hyper_trace.push_back(std::move(rec));
    sol.iterations = iter;

    if (iter > 1) {
      const double scale = sol.mu.cwiseAbs().maxCoeff();
      const double diff = (sol.mu - mu_prev).cwiseAbs().maxCoeff();
      const double rel = scale == 0.0 ? (diff == 0.0 ? 0.0 : HUGE_VAL) : diff / scale;
      const double dL = std::abs(L - sol.objective_trace[sol.objective_trace.size() - 2]);
      if (rel <= cfg.tol_mu && dL <= cfg.tol_L * std::max(std::abs(L), 1.0)) {
        sol.converged = true;
        break;
      }
    }
    if (iter == cfg.max_iter) break;
    mu_prev = sol.mu;

    parallel_for(static_cast<std::size_t>(T), cfg.jobs, [&](std::size_t tt) {
      const auto t = static_cast<Eigen::Index>(tt);
      const auto& step = steps[tt];
      const char* op = "update_beta";
      try {
        // beta is evaluated against the prior Sigma came from, as in the ENET solver
        const double beta = update_beta(data.V.col(t), data.K, step.mu, step.sigma_diag, st.lambda_bar.col(t),
                                        alpha, cfg.beta_mode);
        op = "update_lambda_bar";
        for (Eigen::Index i = 0; i < S; ++i)
          st.lambda_bar(i, t) = update_lambda_bar_mxn(step.mu(i), step.sigma_diag(i), alpha, st.delta(i, t));
        op = "update_delta";
        st.delta.col(t) = update_delta(step.mu);
        st.beta(t) = beta;
      } catch (const Error& e) {
        throw SolverError(static_cast<long>(t), iter, op, e.what());
      }
    });

    if (!cfg.fixed_alpha) {
      try {
        AlphaUpdate up = update_alpha_mxn(sol.mu, sol.sigma_diag, st.lambda_bar, st.delta);
        if (up.fallback) sol.warnings.push_back(up.warning);
        st.alpha = up.alpha;
      } catch (const Error& e) {
        throw SolverError(-1, iter, "update_alpha", e.what());
      }
    }
  }
  sol.column_iterations.assign(static_cast<std::size_t>(T), sol.iterations);
  sol.mxn = std::move(st);
  return sol;
}

}  // namespace ebsl
