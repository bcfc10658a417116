#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ebsl/errors.hpp"
#include "ebsl/problem.hpp"

namespace ebsl {

enum class BetaMode { fixed_one, learned };

inline const char* to_string(BetaMode m) { return m == BetaMode::fixed_one ? "fixed_one" : "learned"; }

/// (alpha1, alpha2) of the classical elastic net, held fixed during a run.
struct PenaltyPair {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
};

struct SolverConfig {
  int max_iter = 100;
  double tol_mu = 1e-4;  // relative sup-norm change of mu
  double tol_L = 1e-6;   // relative change of the objective
  bool learn_k = true;
  bool learn_alpha1 = true;
  std::optional<PenaltyPair> fixed_hyper;  // ENET: disables learning of alpha1 and k
  std::optional<double> fixed_alpha;       // MXN: disables learning of alpha
  double alpha_init = 1.0;                 // MXN starting alpha
  BetaMode beta_mode = BetaMode::fixed_one;
  double epsilon_prior = 1e-2;  // nu = epsilon * S
  std::optional<double> tau;    // defaults to S
  double lambda_bar_init = 0.5;
  double ridge_init_rel = 1e-3;  // ridge weight for the warm start, relative to max singular value^2
  double rank_tol = 1e-12;
  unsigned jobs = 1;

  void validate() const {
    if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (!(tol_mu > 0.0) || !(tol_L > 0.0)) throw ConfigError("tolerances must be > 0");
    if (!(epsilon_prior > 0.0)) throw ConfigError("epsilon_prior must be > 0");
    if (tau && !(*tau > 0.0)) throw ConfigError("tau must be > 0");
    if (!(lambda_bar_init > 0.0 && lambda_bar_init < 1.0)) throw ConfigError("lambda_bar_init must be in (0,1)");
    if (fixed_hyper && (!(fixed_hyper->alpha1 > 0.0) || !(fixed_hyper->alpha2 > 0.0)))
      throw ConfigError("fixed_hyper requires alpha1 > 0 and alpha2 > 0");
    if (fixed_alpha && !(*fixed_alpha > 0.0)) throw ConfigError("fixed_alpha must be > 0");
    if (!(alpha_init > 0.0)) throw ConfigError("alpha_init must be > 0");
    if (!(ridge_init_rel > 0.0)) throw ConfigError("ridge_init_rel must be > 0");
  }

  bool learns_alpha1() const { return learn_alpha1 && !fixed_hyper; }
  bool learns_k() const { return learn_k && !fixed_hyper; }
};

/// Hyperparameters at one outer iteration.  ENET fills alpha1/k/beta per
/// column; MXN fills alpha plus a summary of delta.
struct HyperRecord {
  Vector alpha1;
  Vector k;
  Vector beta;
  double alpha = 0.0;
  double delta_mean = 0.0;
  double delta_max = 0.0;
};

struct EnetHyperState {
  Matrix lambda_bar;  // S x T, in [0,1)
  Vector alpha1;      // T
  Vector k;           // T
  Vector beta;        // T
  double tau = 0.0;
  double nu = 0.0;
};

struct MxnHyperState {
  Matrix lambda_bar;  // S x T
  Matrix delta;       // S x T
  double alpha = 1.0;
  Vector beta;        // T
};

struct Solution {
  Matrix mu;          // S x T
  Matrix sigma_diag;  // S x T
  std::vector<HyperRecord> hyper_trace;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  std::vector<int> column_iterations;
  std::vector<std::string> warnings;
  std::optional<EnetHyperState> enet;
  std::optional<MxnHyperState> mxn;
};

namespace detail {

inline double relative_change(const Vector& now, const Vector& before) {
  const double scale = now.cwiseAbs().maxCoeff();
  const double diff = (now - before).cwiseAbs().maxCoeff();
  if (scale == 0.0) return diff == 0.0 ? 0.0 : HUGE_VAL;
  return diff / scale;
}

/// Ridge estimate K^T (K K^T + lambda I)^{-1} v through the SVD.
inline Vector ridge_column(const LeadFieldSVD& svd, const Vector& v, double lambda) {
  const Vector d = svd.singular;
  const Vector coef = (svd.left.transpose() * v).cwiseProduct(d.cwiseQuotient((d.array().square() + lambda).matrix()));
  return svd.right * coef;
}

}  // namespace detail

}  // namespace ebsl
