#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ebsl/objective.hpp"
#include "ebsl/posterior.hpp"
#include "oracles.hpp"

using namespace ebsl;

namespace {

double max_rel(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

double dense_logdet_term(const Matrix& K, const Vector& lambda, double beta) {
  Matrix A = Matrix::Identity(K.cols(), K.cols()) + lambda.asDiagonal() * K.transpose() * K / beta;
  return std::log(A.determinant());
}

}  // namespace

TEST(Svd, IdentityLeadField) {
  const LeadFieldSVD s = svd_decompose(Matrix::Identity(3, 3));
  EXPECT_EQ(s.rank(), 3);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.singular(i), 1.0, 1e-15);
}

TEST(Svd, ZeroLeadFieldRejected) { EXPECT_THROW(svd_decompose(Matrix::Zero(4, 6)), DegenerateError); }

TEST(Svd, ReconstructsRandomLeadField) {
  std::mt19937_64 rng(7);
  const Matrix K = oracle::random_matrix(rng, 31, 200);
  const LeadFieldSVD s = svd_decompose(K);
  EXPECT_EQ(s.rank(), 31);
  const Matrix back = s.left * s.singular.asDiagonal() * s.right.transpose();
  EXPECT_LE((K - back).norm(), 1e-10 * K.norm());
  for (Eigen::Index i = 1; i < s.rank(); ++i) EXPECT_GE(s.singular(i - 1), s.singular(i));
}

TEST(Svd, TruncatesNumericalRank) {
  std::mt19937_64 rng(8);
  const Matrix A = oracle::random_matrix(rng, 10, 3);
  const Matrix B = oracle::random_matrix(rng, 3, 20);
  EXPECT_EQ(svd_decompose(Matrix(A * B)).rank(), 3);
}

TEST(Posterior, IdentityExample) {
  const LeadFieldSVD s = svd_decompose(Matrix::Identity(3, 3));
  const Vector v(Vector::LinSpaced(3, 1.0, 3.0));
  const PosteriorMoments p = posterior_moments(s, Vector::Ones(3), 1.0, v);
  EXPECT_LE((p.mu - v / 2).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((p.sigma_diag - Vector::Constant(3, 0.5)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Posterior, FullyPrunedPrior) {
  std::mt19937_64 rng(1);
  const Matrix K = oracle::random_matrix(rng, 5, 9);
  const PosteriorMoments p = posterior_moments(svd_decompose(K), Vector::Zero(9), 1.0, Vector::Ones(5));
  EXPECT_TRUE((p.mu.array() == 0.0).all());
  EXPECT_TRUE((p.sigma_diag.array() == 0.0).all());
  EXPECT_EQ(p.logdet_term, 0.0);
}

TEST(Posterior, ScalarExample) {
  Matrix K(1, 1);
  K << 2.0;
  const Vector lambda = Vector::Ones(1);
  const Vector v = Vector::Constant(1, 1.5);
  for (const PosteriorMoments& p : {posterior_moments(svd_decompose(K), lambda, 1.0, v), posterior_direct(K, lambda, 1.0, v)}) {
    EXPECT_NEAR(p.sigma_diag(0), 0.2, 1e-15);
    EXPECT_NEAR(p.mu(0), 2.0 * 1.5 / 5.0, 1e-15);
  }
}

TEST(Posterior, WoodburyMatchesDirectOnRandomInstance) {
  std::mt19937_64 rng(2);
  const Matrix K = oracle::random_matrix(rng, 10, 40);
  const Vector lambda = oracle::log_uniform(rng, 40, 1e-3, 10.0);
  const Vector v = oracle::random_matrix(rng, 10, 1);
  const PosteriorMoments a = posterior_moments(svd_decompose(K), lambda, 0.7, v);
  const PosteriorMoments b = posterior_direct(K, lambda, 0.7, v);
  const oracle::Dense d = oracle::dense_posterior(K, lambda, 0.7, v);
  EXPECT_LE(max_rel(a.mu, b.mu), 1e-8);
  EXPECT_LE(max_rel(a.sigma_diag, b.sigma_diag), 1e-8);
  EXPECT_LE(max_rel(a.mu, d.mu), 1e-8);
  EXPECT_LE(max_rel(a.sigma_diag, Vector(d.sigma.diagonal())), 1e-8);
  EXPECT_NEAR(a.logdet_term, b.logdet_term, 1e-8 * std::abs(b.logdet_term));
  EXPECT_NEAR(a.logdet_term, dense_logdet_term(K, lambda, 0.7), 1e-8 * std::abs(a.logdet_term));
}

TEST(Posterior, WoodburyMatchesDirectOnFiftyInstances) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto N = static_cast<Eigen::Index>(oracle::uniform(rng, 5, 21));
    const auto S = static_cast<Eigen::Index>(oracle::uniform(rng, 10, 101));
    const Matrix K = oracle::random_matrix(rng, N, S);
    const Vector lambda = oracle::log_uniform(rng, S, 1e-6, 1e2);
    const Vector v = oracle::random_matrix(rng, N, 1);
    const double beta = oracle::log_uniform(rng, 1, 0.1, 10.0)(0);
    const PosteriorMoments a = posterior_moments(svd_decompose(K), lambda, beta, v);
    const PosteriorMoments b = posterior_direct(K, lambda, beta, v);
    worst = std::max({worst, max_rel(a.mu, b.mu), max_rel(a.sigma_diag, b.sigma_diag)});
  }
  EXPECT_LE(worst, 1e-7);
}

TEST(Posterior, PrunedCoordinatesExactlyZeroAndRestMatchesReducedProblem) {
  std::mt19937_64 rng(4);
  const Matrix K = oracle::random_matrix(rng, 8, 20);
  Vector lambda = oracle::log_uniform(rng, 20, 0.01, 5.0);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < 20; ++i) {
    if (i % 3 == 0) {
      lambda(i) = 0.0;
    } else {
      kept.push_back(i);
    }
  }
  const Vector v = oracle::random_matrix(rng, 8, 1);
  const PosteriorMoments p = posterior_moments(svd_decompose(K), lambda, 1.3, v);
  Matrix Kr(8, static_cast<Eigen::Index>(kept.size()));
  Vector lr(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    Kr.col(static_cast<Eigen::Index>(j)) = K.col(kept[j]);
    lr(static_cast<Eigen::Index>(j)) = lambda(kept[j]);
  }
  const oracle::Dense d = oracle::dense_posterior(Kr, lr, 1.3, v);
  for (Eigen::Index i = 0; i < 20; i += 3) {
    EXPECT_EQ(p.mu(i), 0.0);
    EXPECT_EQ(p.sigma_diag(i), 0.0);
  }
  for (std::size_t j = 0; j < kept.size(); ++j) {
    EXPECT_NEAR(p.mu(kept[j]), d.mu(static_cast<Eigen::Index>(j)), 1e-9);
    EXPECT_NEAR(p.sigma_diag(kept[j]), d.sigma(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)), 1e-9);
  }
  EXPECT_NEAR(p.logdet_term, dense_logdet_term(Kr, lr, 1.3), 1e-9);
}

TEST(Posterior, LargeNoiseLeavesPrior) {
  std::mt19937_64 rng(5);
  const Matrix K = oracle::random_matrix(rng, 6, 12);
  const Vector lambda = oracle::log_uniform(rng, 12, 0.1, 2.0);
  const PosteriorMoments p = posterior_moments(svd_decompose(K), lambda, 1e12, Vector::Ones(6));
  EXPECT_LE(max_rel(p.sigma_diag, lambda), 1e-9);
  EXPECT_LE(p.mu.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Posterior, ShrinkingOnePriorVarianceShrinksItsMoments) {
  std::mt19937_64 rng(6);
  const Matrix K = oracle::random_matrix(rng, 7, 15);
  const LeadFieldSVD s = svd_decompose(K);
  Vector lambda = oracle::log_uniform(rng, 15, 0.1, 3.0);
  const Vector v = oracle::random_matrix(rng, 7, 1);
  double prev_mu = HUGE_VAL, prev_sigma = HUGE_VAL;
  for (double li : {10.0, 3.0, 1.0, 0.3, 0.1, 0.03, 1e-3, 1e-6, 1e-9, 0.0}) {
    lambda(4) = li;
    const PosteriorMoments p = posterior_moments(s, lambda, 1.0, v);
    EXPECT_LE(std::abs(p.mu(4)), prev_mu);
    EXPECT_LE(p.sigma_diag(4), prev_sigma);
    prev_mu = std::abs(p.mu(4));
    prev_sigma = p.sigma_diag(4);
  }
  EXPECT_EQ(prev_mu, 0.0);
  EXPECT_EQ(prev_sigma, 0.0);
}

TEST(Posterior, VarianceNeverExceedsPrior) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix K = oracle::random_matrix(rng, 6, 30);
    const Vector lambda = oracle::log_uniform(rng, 30, 1e-8, 1e3);
    const PosteriorMoments p = posterior_moments(svd_decompose(K), lambda, 0.5, Vector::Ones(6));
    EXPECT_TRUE((p.sigma_diag.array() <= lambda.array()).all());
    EXPECT_TRUE((p.sigma_diag.array() >= 0.0).all());
  }
}

TEST(Posterior, ValidatesInputs) {
  const LeadFieldSVD s = svd_decompose(Matrix::Identity(3, 3));
  EXPECT_THROW(posterior_moments(s, Vector::Ones(2), 1.0, Vector::Ones(3)), DomainError);
  EXPECT_THROW(posterior_moments(s, -Vector::Ones(3), 1.0, Vector::Ones(3)), DomainError);
  EXPECT_THROW(posterior_moments(s, Vector::Ones(3), 0.0, Vector::Ones(3)), DomainError);
  EXPECT_THROW(posterior_moments(s, Vector::Ones(3), 1.0, Vector::Ones(4)), DomainError);
  EXPECT_THROW(posterior_direct(Matrix::Identity(3, 3), Vector::Zero(3), 1.0, Vector::Ones(3)), DomainError);
}

// ---------------------------------------------------------------- objective

TEST(Objective, ScalarHandEvaluation) {
  Matrix K(1, 1);
  K << 1.0;
  const Vector v = Vector::Zero(1), mu = Vector::Zero(1), lb = Vector::Constant(1, 0.5);
  const ObjectiveBreakdown b = enet_column_objective(K, svd_decompose(K), v, mu, lb, 1.0, 1.0, 1.0, 1.0, 1.0);
  // Lambda = 0.25, gamma = k/(1 - 0.5) = 2
  const double logdet = 0.5 * std::log(1.25);
  const double hyper = std::log(oracle::hp::tail_1) + 0.5 * std::log(2.0) + 2.0 - 0.0 + 1.0;
  EXPECT_EQ(b.data_fit, 0.0);
  EXPECT_EQ(b.prior_quadratic, 0.0);
  EXPECT_NEAR(b.logdet, logdet, 1e-15);
  EXPECT_NEAR(b.hyperprior, hyper, 1e-14);
  EXPECT_NEAR(b.total, logdet + hyper, 1e-14);
}

TEST(Objective, DataFitIsLinearInResidualEnergy) {
  std::mt19937_64 rng(10);
  const Matrix K = oracle::random_matrix(rng, 5, 8);
  const Vector mu = oracle::random_matrix(rng, 8, 1);
  const Vector lb = Vector::Constant(8, 0.4);
  const Vector v1 = oracle::random_matrix(rng, 5, 1);
  const Vector v2 = K * mu + 2.0 * (v1 - K * mu);
  const double beta = 0.8;
  const auto a = enet_column_objective(K, v1, mu, lb, 1.0, 2.0, beta, 8.0, 0.08, 0.3);
  const auto b = enet_column_objective(K, v2, mu, lb, 1.0, 2.0, beta, 8.0, 0.08, 0.3);
  const double delta = (v2 - K * mu).squaredNorm() - (v1 - K * mu).squaredNorm();
  EXPECT_NEAR(b.data_fit - a.data_fit, delta / (2.0 * beta), 1e-12);
  EXPECT_EQ(a.hyperprior, b.hyperprior);
  EXPECT_EQ(a.prior_quadratic, b.prior_quadratic);
}

TEST(Objective, ScalingDataAndMeanTouchesOnlyQuadraticTerms) {
  std::mt19937_64 rng(11);
  const Matrix K = oracle::random_matrix(rng, 4, 6);
  const Vector mu = oracle::random_matrix(rng, 6, 1);
  const Vector v = oracle::random_matrix(rng, 4, 1);
  const Vector lb = Vector::Constant(6, 0.3);
  Vector delta(6);
  delta << 0.5, 1.0, 0.0, 2.0, 0.1, 0.7;
  const double c = 3.0;
  const auto a = mxn_column_objective(K, v, mu, lb, delta, 1.5, 1.0, 0.9);
  const auto b = mxn_column_objective(K, Vector(c * v), Vector(c * mu), lb, delta, 1.5, 1.0, 0.9);
  EXPECT_NEAR(b.data_fit, c * c * a.data_fit, 1e-12 * b.data_fit);
  EXPECT_NEAR(b.prior_quadratic, c * c * a.prior_quadratic, 1e-12 * b.prior_quadratic);
  EXPECT_EQ(a.logdet, b.logdet);
  EXPECT_EQ(a.hyperprior, b.hyperprior);
}

TEST(Objective, WInverseExample) {
  Vector delta(3);
  delta << 5.0, 4.0, 3.0;
  const Vector w = w_inverse_apply(delta);
  EXPECT_DOUBLE_EQ(w(0), 1.0);
  EXPECT_DOUBLE_EQ(w(1), 2.0);
  EXPECT_DOUBLE_EQ(w(2), 3.0);
  EXPECT_DOUBLE_EQ(w_inverse_l1_squared(delta), 36.0);
}

TEST(Objective, WInverseClosedFormInvertsW) {
  for (Eigen::Index S = 2; S <= 10; ++S) {
    Matrix winv(S, S);
    for (Eigen::Index j = 0; j < S; ++j) winv.col(j) = w_inverse_apply(Vector::Unit(S, j));
    const Matrix prod = oracle::w_matrix(S) * winv;
    EXPECT_LE((prod - Matrix::Identity(S, S)).cwiseAbs().maxCoeff(), 1e-12) << "S=" << S;
  }
  EXPECT_THROW(w_inverse_apply(Vector::Ones(1)), DomainError);
}

TEST(Objective, MxnWithoutCouplingHasOnlyTheScaleTerm) {
  const Vector lb = Vector::Constant(5, 0.6);
  EXPECT_NEAR(mxn_hyperprior(lb, Vector::Zero(5), 2.0), -2.5 * std::log(2.0), 1e-15);
}

TEST(Objective, MxnHyperpriorHandEvaluation) {
  Vector lb(3), delta(3);
  lb << 0.2, 0.5, 0.0;
  delta << 1.0, 0.5, 2.0;
  const double alpha = 0.8;
  double want = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double k = alpha * delta(i) * delta(i);
    const double g = k / (1.0 - lb(i));
    want += std::log(std::erfc(std::sqrt(k))) + 0.5 * std::log(g) + g;
  }
  const Vector w = (oracle::w_matrix(3)).inverse() * delta;
  want += alpha * std::pow(w.lpNorm<1>(), 2) - 1.5 * std::log(alpha);
  EXPECT_NEAR(mxn_hyperprior(lb, delta, alpha), want, 1e-12);
}

TEST(Objective, EnetHyperpriorHandEvaluation) {
  Vector lb(2);
  lb << 0.25, 0.0;
  const double k = 1.7, tau = 2.0, nu = 0.3;
  double want = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double g = k / (1.0 - lb(i));
    want += std::log(std::erfc(std::sqrt(k))) + 0.5 * std::log(g) + g;
  }
  want += -tau * std::log(k) + nu * k;
  EXPECT_NEAR(enet_hyperprior(lb, k, tau, nu), want, 1e-13);
}

TEST(Objective, TotalIsSumOfParts) {
  std::mt19937_64 rng(12);
  const Matrix K = oracle::random_matrix(rng, 6, 10);
  const LeadFieldSVD s = svd_decompose(K);
  const Vector v = oracle::random_matrix(rng, 6, 1);
  Vector lb = Vector::Constant(10, 0.5);
  lb(3) = 0.0;
  const PosteriorMoments p = posterior_moments(s, effective_variances(lb, 1.2), 1.0, v);
  const auto b = enet_column_objective(K, s, v, p.mu, lb, 1.2, 3.0, 1.0, 10.0, 0.1);
  EXPECT_TRUE(std::isfinite(b.total));
  EXPECT_DOUBLE_EQ(b.total, b.data_fit + b.logdet + b.prior_quadratic + b.hyperprior);
}

TEST(Objective, FiniteAtTheEdgesOfTheUnitInterval) {
  std::mt19937_64 rng(13);
  const Matrix K = oracle::random_matrix(rng, 5, 7);
  const LeadFieldSVD s = svd_decompose(K);
  const Vector v = oracle::random_matrix(rng, 5, 1);
  Vector lb(7);
  lb << 0.0, kLambdaBarCap, 0.0, 0.5, kLambdaBarCap, 0.0, 1e-300;
  const PosteriorMoments p = posterior_moments(s, effective_variances(lb, 1.0), 1.0, v);
  EXPECT_TRUE(std::isfinite(enet_column_objective(K, s, v, p.mu, lb, 1.0, 2.0, 1.0, 7.0, 0.07).total));
  Vector delta = Vector::Constant(7, 0.3);
  EXPECT_TRUE(std::isfinite(mxn_column_objective(K, s, v, p.mu, lb, delta, 1.0, 1.0).total));
}

TEST(Objective, RejectsLambdaBarAtOne) {
  const Matrix K = Matrix::Identity(2, 2);
  const Vector lb = Vector::Constant(2, 1.0);
  EXPECT_THROW(enet_column_objective(K, svd_decompose(K), Vector::Ones(2), Vector::Zero(2), lb, 1.0, 1.0, 1.0, 2.0, 0.02),
               DomainError);
}

TEST(Objective, MapObjectiveIsSumOfColumns) {
  std::mt19937_64 rng(14);
  const ProblemData data(oracle::random_matrix(rng, 5, 9), oracle::random_matrix(rng, 5, 3));
  const LeadFieldSVD s = svd_decompose(data);
  const Matrix lb = Matrix::Constant(9, 3, 0.4);
  const Matrix mu = oracle::random_matrix(rng, 9, 3);
  const Vector a1 = Vector::LinSpaced(3, 0.5, 2.0), k = Vector::LinSpaced(3, 1.0, 3.0), beta = Vector::Ones(3);
  const auto total = neg_log_posterior_enet(data, s, mu, lb, a1, k, beta, 9.0, 0.09);
  double sum = 0.0;
  for (int t = 0; t < 3; ++t)
    sum += enet_column_objective(data.K, s, data.V.col(t), mu.col(t), lb.col(t), a1(t), k(t), 1.0, 9.0, 0.09).total;
  EXPECT_NEAR(total.total, sum, 1e-12 * std::abs(sum));
  const Matrix delta = mu.cwiseAbs();
  const auto mx = neg_log_posterior_mxn(data, s, mu, lb, delta, 0.7, beta);
  double msum = 0.0;
  for (int t = 0; t < 3; ++t)
    msum += mxn_column_objective(data.K, s, data.V.col(t), mu.col(t), lb.col(t), delta.col(t), 0.7, 1.0).total;
  EXPECT_NEAR(mx.total, msum, 1e-12 * std::abs(msum));
}

TEST(LogDetTangent, ExactAtTheReference) {
  std::mt19937_64 rng(15);
  const Matrix K = oracle::random_matrix(rng, 6, 14);
  const LeadFieldSVD s = svd_decompose(K);
  const Vector lambda = oracle::log_uniform(rng, 14, 0.05, 2.0);
  const PosteriorMoments p = posterior_moments(s, lambda, 0.9, Vector::Ones(6));
  const LogDetTangent tan = LogDetTangent::at(p, lambda, 0.9);
  EXPECT_NEAR(tan.logdet_term(lambda, 0.9), p.logdet_term, 1e-12 * std::abs(p.logdet_term));
}

TEST(LogDetTangent, MajorizesInInversePriorVariance) {
  std::mt19937_64 rng(16);
  const Matrix K = oracle::random_matrix(rng, 6, 14);
  const LeadFieldSVD s = svd_decompose(K);
  const Vector lambda = oracle::log_uniform(rng, 14, 0.05, 2.0);
  const PosteriorMoments p = posterior_moments(s, lambda, 0.9, Vector::Ones(6));
  const LogDetTangent tan = LogDetTangent::at(p, lambda, 0.9);
  for (int rep = 0; rep < 20; ++rep) {
    const Vector other = lambda.cwiseProduct(oracle::log_uniform(rng, 14, 0.2, 5.0));
    EXPECT_GE(tan.logdet_term(other, 0.9) + 1e-12, posterior_logdet_term(s, other, 0.9));
  }
}

TEST(LogDetTangent, SlopeMatchesExactDeterminant) {
  std::mt19937_64 rng(17);
  const Matrix K = oracle::random_matrix(rng, 6, 14);
  const LeadFieldSVD s = svd_decompose(K);
  const Vector lambda = oracle::log_uniform(rng, 14, 0.05, 2.0);
  const double beta = 0.9;
  const PosteriorMoments p = posterior_moments(s, lambda, beta, Vector::Ones(6));
  const LogDetTangent tan = LogDetTangent::at(p, lambda, beta);
  const double h = 1e-6;
  // along log beta
  const double exact_b = (posterior_logdet_term(s, lambda, beta * std::exp(h)) - posterior_logdet_term(s, lambda, beta * std::exp(-h))) / (2 * h);
  const double lin_b = (tan.logdet_term(lambda, beta * std::exp(h)) - tan.logdet_term(lambda, beta * std::exp(-h))) / (2 * h);
  EXPECT_NEAR(lin_b, exact_b, 1e-6);
  // along one coordinate of lambda
  Vector up = lambda, dn = lambda;
  up(3) *= std::exp(h);
  dn(3) *= std::exp(-h);
  const double exact_l = (posterior_logdet_term(s, up, beta) - posterior_logdet_term(s, dn, beta)) / (2 * h);
  const double lin_l = (tan.logdet_term(up, beta) - tan.logdet_term(dn, beta)) / (2 * h);
  EXPECT_NEAR(lin_l, exact_l, 1e-6);
}
