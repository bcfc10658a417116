#pragma once

// Per-column Gaussian posterior of J given V, diag(Lambda) and the noise
// variance beta:
//   Sigma = (K^T K / beta + diag(Lambda)^{-1})^{-1},   mu = Sigma K^T v / beta.
// Solver paths use the SVD of K and only ever form an r x r system.

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ebsl/errors.hpp"
#include "ebsl/problem.hpp"

namespace ebsl {

struct PosteriorMoments {
  Vector mu;
  Vector sigma_diag;
  /// log det(I + diag(Lambda) K^T K / beta); finite even when some Lambda_i = 0.
  double logdet_term = 0.0;
};

namespace detail {

inline void check_prior(const Vector& lambda, Eigen::Index sources, double beta, const char* who) {
  if (lambda.size() != sources) {
    std::ostringstream os;
    os << who << ": lambda has " << lambda.size() << " entries, expected " << sources;
    throw DomainError(os.str());
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError(std::string(who) + ": beta must be > 0");
  if (!lambda.allFinite() || (lambda.array() < 0.0).any())
    throw DomainError(std::string(who) + ": lambda must be finite and >= 0");
}

}  // namespace detail

/// Woodbury/SVD route.  With P = diag(D) R^T and G = beta I + P diag(Lambda) P^T:
///   mu      = Lambda .* (P^T G^{-1} L^T v)
///   Sigma_ii = Lambda_i - Lambda_i^2 || C^{-1} P e_i ||^2,  G = C C^T
/// so pruned coordinates (Lambda_i = 0) come out exactly zero.
inline PosteriorMoments posterior_moments(const LeadFieldSVD& svd, const Vector& lambda, double beta,
                                          const Vector& v) {
  detail::check_prior(lambda, svd.sources(), beta, "posterior_moments");
  if (v.size() != svd.left.rows()) throw DomainError("posterior_moments: observation size mismatch");

  const Matrix& P = svd.scaled_right_t;
  const Eigen::Index r = svd.rank();
  const Matrix weighted = P * lambda.cwiseSqrt().asDiagonal();
  Matrix G = Matrix::Identity(r, r) * beta;
  G.selfadjointView<Eigen::Lower>().rankUpdate(weighted);
  Eigen::LLT<Matrix> llt(G.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "posterior_moments: inner " << r << "x" << r << " system not positive definite (beta=" << beta
       << ", max lambda=" << lambda.maxCoeff() << ")";
    throw NumericError(os.str());
  }

  PosteriorMoments out;
  const Vector y = llt.solve(svd.left.transpose() * v);
  out.mu = lambda.cwiseProduct(P.transpose() * y);

  const Matrix X = llt.matrixL().solve(P);
  const Vector reduction = X.colwise().squaredNorm().transpose();
  out.sigma_diag.resize(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double li = lambda(i);
    out.sigma_diag(i) = std::clamp(li - li * li * reduction(i), 0.0, li);
  }

  const Matrix& L = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index j = 0; j < r; ++j) logdet += 2.0 * std::log(L(j, j));
  out.logdet_term = logdet - static_cast<double>(r) * std::log(beta);
  if (!out.mu.allFinite() || !std::isfinite(out.logdet_term))
    throw NumericError("posterior_moments: non-finite result");
  return out;
}

/// log det(I + diag(Lambda) K^T K / beta) alone.
inline double posterior_logdet_term(const LeadFieldSVD& svd, const Vector& lambda, double beta) {
  detail::check_prior(lambda, svd.sources(), beta, "posterior_logdet_term");
  const Eigen::Index r = svd.rank();
  const Matrix weighted = svd.scaled_right_t * lambda.cwiseSqrt().asDiagonal();
  Matrix G = Matrix::Identity(r, r) * beta;
  G.selfadjointView<Eigen::Lower>().rankUpdate(weighted);
  Eigen::LLT<Matrix> llt(G.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) throw NumericError("posterior_logdet_term: factorization failed");
  const Matrix& L = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index j = 0; j < r; ++j) logdet += 2.0 * std::log(L(j, j));
  return logdet - static_cast<double>(r) * std::log(beta);
}

/// Dense S x S inversion of the precision matrix.  O(S^3); an oracle for
/// posterior_moments, not used by the solvers.
inline PosteriorMoments posterior_direct(const Matrix& K, const Vector& lambda, double beta,
                                         const Vector& v) {
  detail::check_prior(lambda, K.cols(), beta, "posterior_direct");
  if ((lambda.array() <= 0.0).any()) throw DomainError("posterior_direct: lambda must be > 0");
  Matrix precision = K.transpose() * K / beta;
  precision.diagonal() += lambda.cwiseInverse();
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericError("posterior_direct: singular precision matrix");
  const Matrix sigma = llt.solve(Matrix::Identity(K.cols(), K.cols()));
  PosteriorMoments out;
  out.mu = sigma * (K.transpose() * v) / beta;
  out.sigma_diag = sigma.diagonal();
  const Matrix& L = llt.matrixL();
  double log_precision = 0.0;
  for (Eigen::Index j = 0; j < L.rows(); ++j) log_precision += 2.0 * std::log(L(j, j));
  out.logdet_term = log_precision + lambda.array().log().sum();
  return out;
}

}  // namespace ebsl
