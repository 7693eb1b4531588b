#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pfr/core_model.hpp"
#include "pfr/experiments.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace pfr;

namespace {

Matrix example2_loadings() { return example2_truth().B; }

}  // namespace

TEST(MarginalCovariance, ZeroLoadingsGiveIdentity) {
  const Matrix S = marginal_covariance(Matrix::Zero(4, 2), Vector::Ones(4));
  EXPECT_TRUE(S.isApprox(Matrix::Identity(4, 4)));
}

TEST(MarginalCovariance, RankOneUpdate) {
  Matrix B = Matrix::Zero(3, 1);
  B(0, 0) = 1.0;
  const Matrix S = marginal_covariance(B, Vector::Ones(3));
  EXPECT_DOUBLE_EQ(S(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(S(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(S(0, 1), 0.0);
}

TEST(MarginalCovariance, TenthDiagonalOfTwoFactorExample) {
  const Matrix S = marginal_covariance(example2_loadings(), Vector::Constant(10, 0.2));
  EXPECT_NEAR(S(9, 9), 1.2, 1e-15);
}

TEST(MarginalCovariance, RejectsNonPositivePsi) {
  Vector psi = Vector::Ones(3);
  psi(1) = 0.0;
  EXPECT_THROW(marginal_covariance(Matrix::Zero(3, 1), psi), std::domain_error);
}

TEST(PartialFactorModel, InconsistentOmegaIsRejected) {
  FactorModel<double> base{Matrix::Ones(3, 1), Vector::Ones(3)};
  Vector theta(1);
  theta << 1.0;
  EXPECT_THROW(make_partial_factor_model(base, theta, Vector::Ones(3), 0.5), ModelInconsistencyError);
}

TEST(FullCovariance, IndependentResponseIsBlockDiagonal) {
  std::mt19937_64 rng(1);
  FactorModel<double> base{oracle::random_matrix(4, 2, rng), oracle::random_positive(4, 0.5, 1.5, rng)};
  const auto m = make_partial_factor_model(base, Vector::Zero(2), Vector::Zero(4), 1.0);
  const Matrix S = full_covariance(m);
  EXPECT_TRUE(S.block(0, 0, 4, 4).isApprox(marginal_covariance(base)));
  EXPECT_TRUE(S.block(4, 4, 2, 2).isApprox(Matrix::Identity(2, 2)));
  EXPECT_DOUBLE_EQ(S(6, 6), 1.0);
  EXPECT_TRUE(S.block(0, 6, 6, 1).isZero());
}

TEST(FullCovariance, PureFactorCrossBlocks) {
  std::mt19937_64 rng(2);
  FactorModel<double> base{oracle::random_matrix(5, 2, rng), oracle::random_positive(5, 0.5, 1.5, rng)};
  const Vector theta = oracle::random_vector(2, rng);
  const auto m = make_factor_regression(base, theta, 0.7);
  const Matrix S = full_covariance(m);
  EXPECT_TRUE(S.block(0, 7, 5, 1).isApprox(base.B * theta));
  EXPECT_NEAR(S(7, 7), 0.7 + theta.squaredNorm(), 1e-14);
}

TEST(FullCovariance, SchurComplementEqualsConditionalVariance) {
  std::mt19937_64 rng(3);
  const auto m = oracle::random_partial_model(4, 1, rng);
  const Matrix S = full_covariance(m);
  const auto cond = oracle::condition_last(S);
  EXPECT_NEAR(cond.variance, m.sigma2, 1e-10);
}

TEST(FullCovariance, InconsistentParametersThrow) {
  PartialFactorModel<double> m{{Matrix::Ones(2, 1), Vector::Ones(2)}, Vector::Constant(1, 2.0), Vector::Zero(2), 0.1, 0.1};
  EXPECT_THROW(full_covariance(m), ModelInconsistencyError);
}

TEST(FullCovariance, MarginalOfXYEqualsJointCovariance) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const auto m = oracle::random_partial_model(5, 2, rng);
    const Matrix S = full_covariance(m);
    EXPECT_TRUE(S.isApprox(S.transpose(), 0.0));
    const Matrix J = joint_covariance(m);
    EXPECT_EQ(S.block(0, 0, 5, 5), J.block(0, 0, 5, 5));
    EXPECT_EQ(S.block(0, 7, 5, 1), J.block(0, 5, 5, 1));
    EXPECT_EQ(S(7, 7), J(5, 5));
  }
}

TEST(ConditionalMoments, PureFactorMeanIgnoresX) {
  std::mt19937_64 rng(5);
  FactorModel<double> base{oracle::random_matrix(6, 2, rng), oracle::random_positive(6, 0.5, 1.5, rng)};
  const Vector theta = oracle::random_vector(2, rng);
  const auto m = make_factor_regression(base, theta, 0.3);
  const Vector f = oracle::random_vector(2, rng);
  for (int rep = 0; rep < 5; ++rep) {
    const auto c = conditional_moments(m, f, oracle::random_vector(6, rng));
    EXPECT_NEAR(c.mean, theta.dot(f), 1e-12);
    EXPECT_NEAR(c.variance, 0.3, 1e-15);
  }
}

TEST(ConditionalMoments, NullRegression) {
  FactorModel<double> base{Matrix::Ones(3, 1), Vector::Ones(3)};
  const auto m = make_partial_factor_model(base, Vector::Zero(1), Vector::Zero(3), 2.5);
  const auto c = conditional_moments(m, Vector::Ones(1), Vector::Ones(3));
  EXPECT_DOUBLE_EQ(c.mean, 0.0);
  EXPECT_DOUBLE_EQ(c.variance, 2.5);
}

TEST(ConditionalMoments, MatchesSchurComplementOracle) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 1000; ++rep) {
    const Index p = 2 + rep % 5;
    const Index k = 1 + rep % std::min<Index>(p, 3);
    const auto m = oracle::random_partial_model(p, k, rng);
    const Matrix S = full_covariance(m);
    const auto cond = oracle::condition_last(S);
    const Vector f = oracle::random_vector(k, rng);
    const Vector x = oracle::random_vector(p, rng);
    Vector given(p + k);
    given << x, f;
    const auto c = conditional_moments(m, f, x);
    const double scale = std::max(1.0, std::abs(cond.mean_coefficients.dot(given)));
    ASSERT_NEAR(c.mean, cond.mean_coefficients.dot(given), 1e-10 * scale);
    ASSERT_NEAR(c.variance, cond.variance, 1e-10 * std::max(1.0, m.omega));
  }
}

TEST(ImpliedBeta, ZeroCovarianceGivesZero) {
  FactorModel<double> base{Matrix::Ones(3, 1), Vector::Ones(3)};
  const auto m = make_partial_factor_model(base, Vector::Zero(1), Vector::Zero(3), 1.0);
  EXPECT_TRUE(implied_beta(m).isZero());
}

TEST(ImpliedBeta, IdentityCovarianceReturnsV) {
  FactorModel<double> base{Matrix::Zero(3, 1), Vector::Ones(3)};
  Vector V(3);
  V << 0.2, -0.1, 0.3;
  const auto m = make_partial_factor_model(base, Vector::Zero(1), V, 1.0);
  EXPECT_TRUE(implied_beta(m).isApprox(V, 1e-14));
}

TEST(ImpliedBeta, MatchesGaussianConditioning) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const auto m = oracle::random_partial_model(5, 2, rng);
    const auto cond = oracle::condition_last(joint_covariance(m));
    const Vector x = oracle::random_vector(5, rng);
    EXPECT_NEAR(implied_beta(m).dot(x), cond.mean_coefficients.dot(x), 1e-10);
  }
}

TEST(ImpliedBeta, PureFactorCoefficients) {
  std::mt19937_64 rng(8);
  FactorModel<double> base{oracle::random_matrix(6, 2, rng), oracle::random_positive(6, 0.5, 1.5, rng)};
  const Vector theta = oracle::random_vector(2, rng);
  const auto m = make_factor_regression(base, theta, 1.0);
  const Vector expected = oracle::dense_inverse(marginal_covariance(base)) * base.B * theta;
  EXPECT_TRUE(implied_beta(m).isApprox(expected, 1e-12));
}

TEST(SampleJoint, DeterministicGivenSeed) {
  std::mt19937_64 rng(9);
  const auto m = oracle::random_partial_model(4, 2, rng);
  const DataMatrix a = sample_joint(m, 1, 42);
  const DataMatrix b = sample_joint(m, 1, 42);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(*a.y, *b.y);
}

TEST(SampleJoint, IndependentResponseIsUncorrelated) {
  FactorModel<double> base{Matrix::Ones(3, 1), Vector::Ones(3)};
  const auto m = make_partial_factor_model(base, Vector::Zero(1), Vector::Zero(3), 1.0);
  const DataMatrix d = sample_joint(m, 50000, 11);
  for (Index j = 0; j < 3; ++j) {
    const Vector x = d.X.col(j).array() - d.X.col(j).mean();
    const Vector y = d.y->array() - d.y->mean();
    EXPECT_LT(std::abs(x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm())), 0.03);
  }
}

TEST(SampleJoint, SampleCovarianceConverges) {
  std::mt19937_64 rng(10);
  const auto m = oracle::random_partial_model(4, 2, rng);
  const DataMatrix d = sample_joint(m, 100000, 12);
  Matrix W(d.rows(), 5);
  W << d.X, *d.y;
  const Matrix S = W.transpose() * W / static_cast<double>(d.rows());
  const Matrix J = joint_covariance(m);
  const double scale = J.cwiseAbs().maxCoeff();
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) EXPECT_NEAR(S(i, j), J(i, j), 0.05 * scale);
}

TEST(SampleJoint, TwoFactorExampleTenthVariance) {
  const auto m = make_factor_regression(example2_truth(), Vector::Zero(2), 1.0);
  const DataMatrix d = sample_joint(m, 100000, 13);
  const double v = d.X.col(9).squaredNorm() / static_cast<double>(d.rows());
  EXPECT_NEAR(v, 1.2, 0.02 * 1.2);
}

TEST(LogLikelihood, StandardNormalAtZero) {
  EXPECT_NEAR(log_likelihood(Matrix::Ones(1, 1), Matrix::Zero(1, 1)), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(LogLikelihood, ChangeOfVariables) {
  std::mt19937_64 rng(14);
  const Matrix S = oracle::random_spd(3, rng);
  const Matrix X = oracle::random_matrix(7, 3, rng);
  const double c = 2.7;
  const double shift = log_likelihood(Matrix(c * S), Matrix(std::sqrt(c) * X)) - log_likelihood(S, X);
  EXPECT_NEAR(shift, -(7.0 * 3.0 / 2.0) * std::log(c), 1e-10);
}

TEST(LogLikelihood, MatchesNaiveDensity) {
  std::mt19937_64 rng(15);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix S = oracle::random_spd(3, rng);
    const Matrix X = oracle::random_matrix(5, 3, rng);
    EXPECT_NEAR(log_likelihood(S, X), oracle::naive_log_likelihood(S, X), 1e-10);
  }
}

TEST(LogLikelihood, RejectsNonPositiveDefinite) {
  Matrix S(2, 2);
  S << 1, 2, 2, 1;
  EXPECT_THROW(log_likelihood(S, Matrix::Zero(1, 2)), std::domain_error);
}

TEST(LogLikelihood, PerObservationAverageConverges) {
  std::mt19937_64 rng(16);
  const auto m = oracle::random_partial_model(4, 1, rng);
  const Matrix S = joint_covariance(m);
  const DataMatrix d = sample_joint(m, 100000, 17);
  Matrix W(d.rows(), 5);
  W << d.X, *d.y;
  const double avg = log_likelihood(S, W) / static_cast<double>(d.rows());
  const double expected = -2.5 * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(S.determinant()) - 2.5;
  EXPECT_NEAR(avg, expected, 0.02);
}

TEST(DataMatrix, CenteringRecordsStatistics) {
  Matrix X(3, 2);
  X << 1, 2, 3, 4, 5, 9;
  Vector y(3);
  y << 1.0, std::nan(""), 3.0;
  DataMatrix d = make_data(X, y);
  ASSERT_EQ(d.labeled.size(), 2u);
  EXPECT_EQ(d.unlabeled(), std::vector<Index>{1});
  d.center();
  EXPECT_TRUE(is_centered(d.X));
  EXPECT_DOUBLE_EQ(d.column_means(1), 5.0);
  EXPECT_DOUBLE_EQ(d.y_mean, 2.0);
  EXPECT_DOUBLE_EQ(d.labeled_y()(0), -1.0);
}
