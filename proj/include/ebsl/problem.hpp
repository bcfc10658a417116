#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <sstream>

#include "ebsl/errors.hpp"

namespace ebsl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// The linear system V = K J + noise: lead field K (N x S), observations V (N x T).
struct ProblemData {
  Matrix K;
  Matrix V;

  ProblemData() = default;
  ProblemData(Matrix lead_field, Matrix observations)
      : K(std::move(lead_field)), V(std::move(observations)) {
    validate();
  }

  Eigen::Index sensors() const { return K.rows(); }
  Eigen::Index sources() const { return K.cols(); }
  Eigen::Index samples() const { return V.cols(); }

  void validate() const {
    if (K.rows() < 1 || K.cols() < 1 || V.cols() < 1)
      throw DomainError("ProblemData: K and V must be non-empty");
    if (K.rows() != V.rows()) {
      std::ostringstream os;
      os << "ProblemData: K has " << K.rows() << " rows but V has " << V.rows();
      throw DomainError(os.str());
    }
    if (!K.allFinite() || !V.allFinite()) throw DomainError("ProblemData: non-finite entries");
  }
};

/// Economical, rank-truncated SVD K = left * diag(singular) * right^T.
struct LeadFieldSVD {
  Matrix left;      // N x r
  Vector singular;  // r, descending, > 0
  Matrix right;     // S x r
  Matrix scaled_right_t;  // diag(singular) * right^T, r x S

  Eigen::Index rank() const { return singular.size(); }
  Eigen::Index sources() const { return right.rows(); }
};

inline LeadFieldSVD svd_decompose(const Matrix& K, double rank_tol = 1e-12) {
  if (K.size() == 0) throw DomainError("svd_decompose: empty lead field");
  if (!K.allFinite()) throw DomainError("svd_decompose: non-finite lead field");
  Eigen::BDCSVD<Matrix> svd(K, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericError("svd_decompose: SVD failed");
  const Vector& d = svd.singularValues();
  const double dmax = d.size() > 0 ? d(0) : 0.0;
  Eigen::Index r = 0;
  while (r < d.size() && d(r) > rank_tol * dmax && d(r) > 0.0) ++r;
  if (r == 0) throw DegenerateError("svd_decompose: lead field has rank 0");
  LeadFieldSVD out;
  out.left = svd.matrixU().leftCols(r);
  out.singular = d.head(r);
  out.right = svd.matrixV().leftCols(r);
  out.scaled_right_t = out.singular.asDiagonal() * out.right.transpose();
  return out;
}

inline LeadFieldSVD svd_decompose(const ProblemData& data, double rank_tol = 1e-12) {
  return svd_decompose(data.K, rank_tol);
}

}  // namespace ebsl
