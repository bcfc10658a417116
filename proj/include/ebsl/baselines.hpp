#pragma once

// Penalized least squares comparators:
//   J = argmin |V - K J|^2 + lambda P(L J)
// Ridge and the Laplacian-weighted ridge have closed forms.  LASSO, ENET and
// LASSO-fusion run majorization-minimization with the local quadratic
// approximation, applied to the smoothed absolute value
//   rho(x) = |x| - eps log(1 + |x|/eps),
// which is concave in x^2, so the quadratic  rho(x0) + (x^2 - x0^2) / (2(|x0| + eps))
// majorizes it exactly and every step is a true descent step.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ebsl/errors.hpp"
#include "ebsl/parallel.hpp"
#include "ebsl/problem.hpp"

namespace ebsl {

enum class PenaltyKind { ridge, laplacian_ridge, lasso, enet, lasso_fusion };

inline const char* to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::ridge: return "ridge";
    case PenaltyKind::laplacian_ridge: return "laplacian_ridge";
    case PenaltyKind::lasso: return "lasso";
    case PenaltyKind::enet: return "enet";
    case PenaltyKind::lasso_fusion: return "lasso_fusion";
  }
  return "?";
}

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::lasso;
  double lambda = 1.0;
  double mu_mix = 0.5;                // enet: alpha1 = lambda mu_mix, alpha2 = lambda (1 - mu_mix)
  std::optional<Matrix> L_operator;   // required by lasso_fusion and laplacian_ridge

  void validate(Eigen::Index S) const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("penalty: lambda must be > 0");
    if (kind == PenaltyKind::enet && !(mu_mix > 0.0 && mu_mix < 1.0))
      throw ConfigError("penalty: enet requires mu_mix in (0,1)");
    if ((kind == PenaltyKind::lasso_fusion || kind == PenaltyKind::laplacian_ridge) && !L_operator)
      throw ConfigError(std::string("penalty: ") + to_string(kind) + " requires an L operator");
    if (L_operator && L_operator->cols() != S) throw ConfigError("penalty: L operator has the wrong width");
  }

  double alpha1() const { return kind == PenaltyKind::enet ? lambda * mu_mix : 0.0; }
  double alpha2() const { return kind == PenaltyKind::enet ? lambda * (1.0 - mu_mix) : lambda; }
};

/// Periodic first difference: (D x)_i = x_{i+1} - x_i.
inline Matrix ring_first_difference(Eigen::Index S) {
  if (S < 2) throw DomainError("ring_first_difference: S must be >= 2");
  Matrix D = Matrix::Zero(S, S);
  for (Eigen::Index i = 0; i < S; ++i) {
    D(i, i) = -1.0;
    D(i, (i + 1) % S) += 1.0;
  }
  return D;
}

/// Periodic second difference (discrete Laplacian on the ring).
inline Matrix ring_laplacian(Eigen::Index S) {
  if (S < 3) throw DomainError("ring_laplacian: S must be >= 3");
  Matrix L = Matrix::Zero(S, S);
  for (Eigen::Index i = 0; i < S; ++i) {
    L(i, i) = -2.0;
    L(i, (i + 1) % S) = 1.0;
    L(i, (i + S - 1) % S) = 1.0;
  }
  return L;
}

/// J = (K^T K + lambda L^T L)^{-1} K^T V.  Without L the SVD of K is used.
inline Matrix ridge_solve(const ProblemData& data, double lambda, const std::optional<Matrix>& L = std::nullopt) {
  data.validate();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("ridge_solve: lambda must be > 0");
  if (!L) {
    const LeadFieldSVD svd = svd_decompose(data);
    const Vector gain = svd.singular.cwiseQuotient((svd.singular.array().square() + lambda).matrix());
    return svd.right * gain.asDiagonal() * (svd.left.transpose() * data.V);
  }
  if (L->cols() != data.sources()) throw DomainError("ridge_solve: L operator has the wrong width");
  Matrix A = data.K.transpose() * data.K + lambda * (L->transpose() * *L);
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw NumericError("ridge_solve: system not positive definite");
  Matrix J = llt.solve(data.K.transpose() * data.V);
  if (!J.allFinite()) throw NumericError("ridge_solve: non-finite solution");
  return J;
}

/// Effective degrees of freedom tr(K (K^T K + lambda L^T L)^{-1} K^T) of the ridge family.
inline double ridge_dof(const ProblemData& data, double lambda, const std::optional<Matrix>& L = std::nullopt) {
  if (!L) {
    const LeadFieldSVD svd = svd_decompose(data);
    const auto d2 = svd.singular.array().square();
    return (d2 / (d2 + lambda)).sum();
  }
  Matrix A = data.K.transpose() * data.K + lambda * (L->transpose() * *L);
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw NumericError("ridge_dof: system not positive definite");
  const Matrix X = llt.solve(data.K.transpose());
  return (data.K * X).trace();
}

struct MmOptions {
  double eps_lqa = 1e-8;
  int max_iter = 500;
  double tol = 1e-6;               // relative sup-norm change of a column
  double descent_tol = 1e-8;       // allowed relative objective increase before failing
  unsigned jobs = 1;
};

struct MmResult {
  Matrix J;                               // S x T, truncated
  std::vector<double> dof;                // per column, at the final weights
  std::vector<std::vector<double>> objective_trace;  // per column, smoothed objective
  std::vector<int> iterations;
  bool converged = true;
  double max_relative_increase = 0.0;     // worst observed objective increase
};

/// Smoothed absolute value used by the majorization.
inline double smoothed_abs(double x, double eps) {
  const double a = std::abs(x);
  return a - eps * std::log1p(a / eps);
}

/// |v - K j|^2 + alpha1 |j|^2 + alpha2 sum rho(L j), with L = I unless fused.
inline double mm_objective(const Matrix& K, const Vector& v, const Vector& j, const PenaltySpec& pen, double eps) {
  double pen_sum = 0.0;
  if (pen.kind == PenaltyKind::lasso_fusion) {
    const Vector lj = *pen.L_operator * j;
    for (Eigen::Index m = 0; m < lj.size(); ++m) pen_sum += smoothed_abs(lj(m), eps);
  } else {
    for (Eigen::Index m = 0; m < j.size(); ++m) pen_sum += smoothed_abs(j(m), eps);
  }
  return (v - K * j).squaredNorm() + pen.alpha1() * j.squaredNorm() + pen.alpha2() * pen_sum;
}

namespace detail {

struct MmColumn {
  Vector j;
  double dof = 0.0;
  std::vector<double> objective;
  int iterations = 0;
  bool converged = false;
  double max_increase = 0.0;
};

inline MmColumn mm_column(const Matrix& K, const Vector& v, const Vector& start, const PenaltySpec& pen,
                          const MmOptions& opt, long column) {
  const Eigen::Index N = K.rows();
  const bool fused = pen.kind == PenaltyKind::lasso_fusion;
  const double a1 = pen.alpha1();
  const double a2 = pen.alpha2();
  MmColumn out;
  out.j = start;
  double f = mm_objective(K, v, out.j, pen, opt.eps_lqa);
  out.objective.push_back(f);

  // One MM step from j at weights w; also returns the hat-matrix trace.
  auto step = [&](const Vector& j, double* dof) -> Vector {
    if (fused) {
      const Matrix& L = *pen.L_operator;
      const Vector w = ((L * j).cwiseAbs().array() + opt.eps_lqa).inverse().matrix();
      Matrix A = K.transpose() * K + (0.5 * a2) * (L.transpose() * w.asDiagonal() * L);
      Eigen::LLT<Matrix> llt(A);
      if (llt.info() != Eigen::Success) throw NumericError("mm_solve: fused system not positive definite");
      if (dof) *dof = (K * llt.solve(K.transpose())).trace();
      return llt.solve(K.transpose() * v);
    }
    // (K^T K + D) j = K^T v with D diagonal; solved in sensor space:
    //   j = D^{-1} K^T (I + K D^{-1} K^T)^{-1} v
    const Vector dinv = (a1 + 0.5 * a2 * (j.cwiseAbs().array() + opt.eps_lqa).inverse()).inverse().matrix();
    const Matrix KD = K * dinv.asDiagonal();
    Matrix M = KD * K.transpose();
    Matrix A = M;
    A.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw NumericError("mm_solve: sensor-space system not positive definite");
    if (dof) *dof = static_cast<double>(N) - llt.solve(Matrix::Identity(N, N)).trace();  // tr(M (I+M)^{-1})
    return KD.transpose() * llt.solve(v);
  };

  for (int it = 1; it <= opt.max_iter; ++it) {
    Vector next = step(out.j, nullptr);
    if (!next.allFinite()) throw SolverError(column, it, "mm_step", "non-finite iterate");
    const double fn = mm_objective(K, v, next, pen, opt.eps_lqa);
    const double rel_inc = (fn - f) / std::max(std::abs(f), 1e-300);
    out.max_increase = std::max(out.max_increase, rel_inc);
    if (rel_inc > opt.descent_tol) {
      std::ostringstream os;
      os << "objective increased from " << f << " to " << fn;
      throw SolverError(column, it, "mm_descent", os.str());
    }
    const double scale = next.cwiseAbs().maxCoeff();
    const double diff = (next - out.j).cwiseAbs().maxCoeff();
    out.j = std::move(next);
    f = fn;
    out.objective.push_back(f);
    out.iterations = it;
    if (diff <= opt.tol * scale || scale == 0.0) {
      out.converged = true;
      break;
    }
  }
  step(out.j, &out.dof);
  for (Eigen::Index i = 0; i < out.j.size(); ++i)
    if (std::abs(out.j(i)) <= opt.eps_lqa) out.j(i) = 0.0;
  return out;
}

}  // namespace detail

/// MM/LQA solution for lasso, enet or lasso_fusion, column by column.
/// `start` (S x T) warm-starts the iteration; by default a light ridge pass.
inline MmResult mm_solve(const ProblemData& data, const PenaltySpec& pen, const MmOptions& opt = {},
                         const Matrix* start = nullptr) {
  data.validate();
  pen.validate(data.sources());
  if (pen.kind != PenaltyKind::lasso && pen.kind != PenaltyKind::enet && pen.kind != PenaltyKind::lasso_fusion)
    throw ConfigError("mm_solve: penalty must be lasso, enet or lasso_fusion");
  if (!(opt.eps_lqa > 0.0)) throw ConfigError("mm_solve: eps_lqa must be > 0");
  const Eigen::Index S = data.sources();
  const Eigen::Index T = data.samples();

  Matrix init;
  if (start) {
    if (start->rows() != S || start->cols() != T) throw DomainError("mm_solve: warm start has the wrong shape");
    init = *start;
  } else {
    const LeadFieldSVD svd = svd_decompose(data);
    init = ridge_solve(data, 1e-3 * svd.singular(0) * svd.singular(0));
  }

  std::vector<detail::MmColumn> cols(static_cast<std::size_t>(T));
  parallel_for(static_cast<std::size_t>(T), opt.jobs, [&](std::size_t t) {
    const auto c = static_cast<Eigen::Index>(t);
    cols[t] = detail::mm_column(data.K, data.V.col(c), init.col(c), pen, opt, static_cast<long>(t));
  });

  MmResult res;
  res.J.resize(S, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    auto& c = cols[static_cast<std::size_t>(t)];
    res.J.col(t) = c.j;
    res.dof.push_back(c.dof);
    res.objective_trace.push_back(std::move(c.objective));
    res.iterations.push_back(c.iterations);
    res.converged = res.converged && c.converged;
    res.max_relative_increase = std::max(res.max_relative_increase, c.max_increase);
  }
  return res;
}

/// GCV(lambda) = (|V - K J|_F^2 / (N T)) / (1 - mean_t dof_t / N)^2.
inline double gcv_score(const ProblemData& data, const Matrix& J, double mean_dof) {
  const double N = static_cast<double>(data.sensors());
  const double denom = 1.0 - mean_dof / N;
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  const double fit = (data.V - data.K * J).squaredNorm() / (N * static_cast<double>(data.samples()));
  return fit / (denom * denom);
}

struct GcvResult {
  double lambda = 0.0;
  std::vector<std::pair<double, double>> curve;  // (lambda, GCV)
  Matrix J;                                       // solution at the selected lambda
  std::optional<MmResult> mm;                     // MM details at the selected lambda
};

/// Evaluates GCV on every grid value (in the order given) and keeps the
/// minimizer.  For MM penalties, consecutive grid points warm-start each other.
inline GcvResult gcv_select(const ProblemData& data, const PenaltySpec& family, const std::vector<double>& grid,
                            const MmOptions& opt = {}) {
  if (grid.empty()) throw ConfigError("gcv_select: empty lambda grid");
  for (double g : grid)
    if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("gcv_select: grid values must be > 0");
  GcvResult res;
  double best = std::numeric_limits<double>::infinity();
  const bool closed_form = family.kind == PenaltyKind::ridge || family.kind == PenaltyKind::laplacian_ridge;
  std::optional<Matrix> warm;
  for (double lambda : grid) {
    PenaltySpec pen = family;
    pen.lambda = lambda;
    Matrix J;
    double dof = 0.0;
    std::optional<MmResult> detail_mm;
    if (closed_form) {
      const std::optional<Matrix> L = family.kind == PenaltyKind::ridge ? std::nullopt : family.L_operator;
      J = ridge_solve(data, lambda, L);
      dof = ridge_dof(data, lambda, L);
    } else {
      MmResult mm = mm_solve(data, pen, opt, warm ? &*warm : nullptr);
      J = mm.J;
      for (double d : mm.dof) dof += d;
      dof /= static_cast<double>(mm.dof.size());
      warm = J;
      detail_mm = std::move(mm);
      // truncated zeros would freeze the next run; nudge them off zero
      for (Eigen::Index i = 0; i < warm->size(); ++i)
        if (warm->data()[i] == 0.0) warm->data()[i] = 10.0 * opt.eps_lqa;
    }
    const double score = gcv_score(data, J, dof);
    res.curve.emplace_back(lambda, score);
    if (score < best) {
      best = score;
      res.lambda = lambda;
      res.J = std::move(J);
      res.mm = std::move(detail_mm);
    }
  }
  if (!std::isfinite(best)) throw NumericError("gcv_select: degrees of freedom reach N on the whole grid");
  return res;
}

/// Log-spaced grid lo, ..., hi with `count` points.
inline std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw ConfigError("log_grid: need 0 < lo <= hi and count >= 1");
  std::vector<double> g;
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    g.push_back(lo * std::pow(hi / lo, f));
  }
  return g;
}

/// Smallest lambda at which the lasso (or the L1 part of the enet) returns
/// J = 0 for every column: 2 |K^T V|_max / (1 - mu_mix).
inline double lambda_max(const ProblemData& data, const PenaltySpec& family) {
  const double g = 2.0 * (data.K.transpose() * data.V).cwiseAbs().maxCoeff();
  return family.kind == PenaltyKind::enet ? g / (1.0 - family.mu_mix) : g;
}

/// Default GCV grid: `count` log-spaced values spanning `decades` below
/// lambda_max (the squared top singular value of K for the ridge family),
/// largest first so warm starts follow a growing support.
inline std::vector<double> default_lambda_grid(const ProblemData& data, const PenaltySpec& family, int count = 7,
                                               double decades = 3.0) {
  const bool ridge_family = family.kind == PenaltyKind::ridge || family.kind == PenaltyKind::laplacian_ridge;
  double top = ridge_family ? std::pow(svd_decompose(data).singular(0), 2) : lambda_max(data, family);
  if (!(top > 0.0)) top = 1.0;
  std::vector<double> g = log_grid(top * std::pow(10.0, -decades), top, count);
  std::reverse(g.begin(), g.end());
  return g;
}

}  // namespace ebsl
