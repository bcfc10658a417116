#pragma once

// Reconstruction quality measures.  Maps are compared cell by cell over the
// whole S x T grid; percentages are in [0, 100].

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ebsl/errors.hpp"
#include "ebsl/problem.hpp"
#include "ebsl/simulate.hpp"

namespace ebsl {

struct EvalReport {
  std::string method;
  double one_minus_corr = 0.0;
  double sparseness_pct = 0.0;
  double sensitivity_pct = 0.0;
  double specificity_pct = 0.0;
  double auc_pct = 0.0;
  double threshold_used = 0.0;  // absolute threshold applied for sens/spec
  double zero_tol_rel = 0.0;
};

namespace detail {

inline void check_same_shape(const Matrix& a, Eigen::Index rows, Eigen::Index cols, const char* who) {
  if (a.rows() != rows || a.cols() != cols) throw DomainError(std::string(who) + ": shape mismatch");
}

}  // namespace detail

/// 1 - Pearson correlation of the vectorized maps.
inline double one_minus_corr(const Matrix& est, const Matrix& truth) {
  detail::check_same_shape(est, truth.rows(), truth.cols(), "one_minus_corr");
  const auto a = est.array() - est.mean();
  const auto b = truth.array() - truth.mean();
  const double saa = (a * a).sum();
  const double sbb = (b * b).sum();
  if (!(saa > 0.0) || !(sbb > 0.0)) throw DomainError("one_minus_corr: zero-variance input");
  const double r = (a * b).sum() / std::sqrt(saa * sbb);
  return 1.0 - std::clamp(r, -1.0, 1.0);
}

/// Percentage of cells with |J| <= zero_tol_rel * max|J|.  A zero map is fully sparse.
inline double sparseness_pct(const Matrix& J, double zero_tol_rel = 0.0) {
  if (!J.allFinite()) throw DomainError("sparseness_pct: non-finite entries");
  if (J.size() == 0) throw DomainError("sparseness_pct: empty map");
  const double cut = zero_tol_rel * J.cwiseAbs().maxCoeff();
  const auto zeros = (J.array().abs() <= cut).count();
  return 100.0 * static_cast<double>(zeros) / static_cast<double>(J.size());
}

struct SensSpec {
  double sensitivity_pct = 0.0;
  double specificity_pct = 0.0;
  double threshold = 0.0;
};

/// Detection is |J| > threshold_frac * max|J|.
inline SensSpec sens_spec(const Matrix& est, const Mask& support, double threshold_frac = 0.01) {
  detail::check_same_shape(est, support.rows(), support.cols(), "sens_spec");
  if (!(threshold_frac > 0.0 && threshold_frac < 1.0)) throw DomainError("sens_spec: threshold_frac must be in (0,1)");
  const auto pos = support.count();
  if (pos == 0) throw DomainError("sens_spec: empty true support, sensitivity undefined");
  const auto neg = support.size() - pos;
  SensSpec out;
  out.threshold = threshold_frac * est.cwiseAbs().maxCoeff();
  const Mask detected = est.array().abs() > out.threshold;
  const auto tp = (detected && support).count();
  const auto tn = (!detected && !support).count();
  out.sensitivity_pct = 100.0 * static_cast<double>(tp) / static_cast<double>(pos);
  out.specificity_pct = neg == 0 ? 100.0 : 100.0 * static_cast<double>(tn) / static_cast<double>(neg);
  return out;
}

/// ROC AUC of |J| as a detector of the support, by the Mann-Whitney rank
/// statistic.  Tied scores share their average rank.
inline double roc_auc(const Matrix& est, const Mask& support) {
  detail::check_same_shape(est, support.rows(), support.cols(), "roc_auc");
  const Eigen::Index n = est.size();
  const double pos = static_cast<double>(support.count());
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) throw DomainError("roc_auc: support must be neither empty nor full");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double* score = est.data();
  const bool* label = support.data();
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return std::abs(score[a]) < std::abs(score[b]); });
  double rank_sum = 0.0;
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    const double s = std::abs(score[order[static_cast<std::size_t>(i)]]);
    while (j < n && std::abs(score[order[static_cast<std::size_t>(j)]]) == s) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (Eigen::Index m = i; m < j; ++m)
      if (label[order[static_cast<std::size_t>(m)]]) rank_sum += avg_rank;
    i = j;
  }
  const double u = rank_sum - pos * (pos + 1.0) / 2.0;
  return 100.0 * u / (pos * neg);
}

/// The same AUC by sweeping every distinct threshold and integrating the ROC
/// curve with the trapezoid rule.  Slower; kept as a cross-check.
inline double roc_auc_sweep(const Matrix& est, const Mask& support) {
  detail::check_same_shape(est, support.rows(), support.cols(), "roc_auc_sweep");
  const double pos = static_cast<double>(support.count());
  const double neg = static_cast<double>(est.size()) - pos;
  if (pos == 0 || neg == 0) throw DomainError("roc_auc_sweep: support must be neither empty nor full");
  std::vector<double> levels(est.data(), est.data() + est.size());
  for (double& x : levels) x = std::abs(x);
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  double area = 0.0;
  double fpr_prev = 0.0;
  double tpr_prev = 0.0;
  for (double level : levels) {
    // detected = score >= level
    const Mask detected = est.array().abs() >= level;
    const double tpr = static_cast<double>((detected && support).count()) / pos;
    const double fpr = static_cast<double>((detected && !support).count()) / neg;
    area += 0.5 * (fpr - fpr_prev) * (tpr + tpr_prev);
    fpr_prev = fpr;
    tpr_prev = tpr;
  }
  area += 0.5 * (1.0 - fpr_prev) * (1.0 + tpr_prev);
  return 100.0 * area;
}

/// (sum_t (sum_i |J_it|^p)^(q/p))^(1/q).
inline double mixed_norm(const Matrix& J, double p, double q) {
  if (!(p >= 1.0) || !(q >= 1.0)) throw DomainError("mixed_norm: p and q must be >= 1");
  double outer = 0.0;
  for (Eigen::Index t = 0; t < J.cols(); ++t) {
    const double inner = std::pow(J.col(t).array().abs().pow(p).sum(), 1.0 / p);
    outer += std::pow(inner, q);
  }
  return std::pow(outer, 1.0 / q);
}

/// Elitist penalty |J|_{1,2}^2 = sum_t |J_t|_1^2.
inline double elitist_penalty(const Matrix& J) {
  double s = 0.0;
  for (Eigen::Index t = 0; t < J.cols(); ++t) {
    const double l1 = J.col(t).lpNorm<1>();
    s += l1 * l1;
  }
  return s;
}

/// Every evaluation measure for one estimate.
inline EvalReport evaluate(const std::string& method, const Matrix& est, const Matrix& truth, const Mask& support,
                           double zero_tol_rel, double threshold_frac = 0.01) {
  EvalReport r;
  r.method = method;
  r.zero_tol_rel = zero_tol_rel;
  r.one_minus_corr = one_minus_corr(est, truth);
  r.sparseness_pct = sparseness_pct(est, zero_tol_rel);
  const SensSpec ss = sens_spec(est, support, threshold_frac);
  r.sensitivity_pct = ss.sensitivity_pct;
  r.specificity_pct = ss.specificity_pct;
  r.threshold_used = ss.threshold;
  r.auc_pct = roc_auc(est, support);
  return r;
}

}  // namespace ebsl
