#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pfr/baselines.hpp"
#include "pfr/core_model.hpp"
#include "pfr/partial_factor_regression.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <random>

using namespace pfr;

namespace {

struct FactorData {
  Matrix B;
  Vector Psi;
  Matrix X;
  Vector y;
  double sigma2;
};

// y depends on X only through the factors.
FactorData pure_factor_data(Index n, Index p, Index k, double sigma2, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FactorData d;
  d.B = oracle::random_matrix(p, k, rng);
  d.Psi = Vector::Constant(p, 0.25);
  d.sigma2 = sigma2;
  const Vector theta = Vector::Constant(k, 1.0);
  const auto model = make_factor_regression(FactorModel<double>{d.B, d.Psi}, theta, sigma2);
  const DataMatrix s = sample_joint(model, n, seed + 1);
  d.X = s.X;
  d.y = *s.y;
  return d;
}

}  // namespace

TEST(Augment, ExactFactorStructureHasZeroResiduals) {
  std::mt19937_64 rng(1);
  const Matrix B = oracle::random_matrix(6, 2, rng);
  const Matrix F = oracle::random_matrix(5, 2, rng);
  const AugmentedDesign z = augment_with_scores(B, Vector::Ones(6), F, F * B.transpose());
  EXPECT_EQ(z.k, 2);
  EXPECT_EQ(z.p(), 6);
  EXPECT_TRUE(z.Z.leftCols(2).isApprox(F));
  EXPECT_LT(z.Z.rightCols(6).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Augment, NoFactorStructureCopiesPredictors) {
  std::mt19937_64 rng(2);
  const Matrix X = oracle::random_matrix(7, 4, rng);
  const FactorPosterior post = fixed_posterior(Matrix::Zero(4, 1), Vector::Ones(4), X);
  const AugmentedDesign z = augment(post, X);
  EXPECT_EQ(z.Z.col(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(z.Z.rightCols(4).isApprox(X));
}

TEST(Augment, HandComputedResidual) {
  Matrix B(2, 1);
  B << 1.0, 0.0;
  Matrix F(1, 1);
  F << 2.0;
  Matrix X(1, 2);
  X << 3.0, 2.0;
  const AugmentedDesign z = augment_with_scores(B, Eigen::Vector2d(1.0, 4.0), F, X);
  EXPECT_DOUBLE_EQ(z.Z(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(z.Z(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(z.Z(0, 2), 1.0);
}

TEST(Augment, DimensionMismatchThrows) {
  std::mt19937_64 rng(3);
  const Matrix X = oracle::random_matrix(5, 4, rng);
  const FactorPosterior post = fixed_posterior(oracle::random_matrix(4, 1, rng), Vector::Ones(4), X);
  EXPECT_THROW(augment(post, Matrix(oracle::random_matrix(6, 4, rng))), std::invalid_argument);
  EXPECT_THROW(augment_new(post, oracle::random_matrix(3, 5, rng)), std::invalid_argument);
  EXPECT_THROW(augment_with_scores(Matrix::Ones(4, 1), Vector::Ones(3), Matrix::Ones(5, 1), X), std::invalid_argument);
}

TEST(TwoPenaltyRidge, IdentityDesignHandSolved) {
  const AugmentedDesign z{Matrix::Identity(2, 2), 1, {}};
  const Vector g = two_penalty_ridge(z, Vector::Ones(2), 1.0, 1.0);
  EXPECT_NEAR(g(0), 0.5, 1e-15);
  EXPECT_NEAR(g(1), 0.5, 1e-15);
}

TEST(TwoPenaltyRidge, EqualPenaltiesCollapseToRidge) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    // alternate tall and wide designs so both solver branches are exercised
    const Index n = rep % 2 == 0 ? 30 : 8;
    const Index k = 2;
    const Index p = 10;
    const AugmentedDesign z{oracle::random_matrix(n, k + p, rng), k, {}};
    const Vector y = oracle::random_vector(n, rng);
    const double tau = std::exp(std::uniform_real_distribution<double>(-3.0, 3.0)(rng));
    const Vector g = two_penalty_ridge(z, y, tau, tau);
    EXPECT_LT((g - ridge_estimator(z.Z, y, tau)).cwiseAbs().maxCoeff(), 1e-10) << "rep " << rep;
  }
}

TEST(TwoPenaltyRidge, MatchesGeneralizedRidgeOracle) {
  std::mt19937_64 rng(5);
  for (Index n : {6, 40}) {
    const Index k = 3;
    const Index p = 12;
    const AugmentedDesign z{oracle::random_matrix(n, k + p, rng), k, {}};
    const Vector y = oracle::random_vector(n, rng);
    Vector d(k + p);
    d.head(k).setConstant(0.3);
    d.tail(p).setConstant(7.0);
    const Vector expected = oracle::generalized_ridge(z.Z, y, d.asDiagonal(), Vector::Zero(k + p));
    EXPECT_LT((two_penalty_ridge(z, y, 0.3, 7.0) - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(TwoPenaltyRidge, HugeResidualPenaltyApproachesFactorOnlyFit) {
  std::mt19937_64 rng(6);
  const AugmentedDesign z{oracle::random_matrix(25, 8, rng), 2, {}};
  const Vector y = oracle::random_vector(25, rng);
  const Vector g = two_penalty_ridge(z, y, 0.5, 1e12);
  EXPECT_LT(g.tail(6).cwiseAbs().maxCoeff(), 1e-9);
  const Vector factor_only = ridge_estimator(z.Z.leftCols(2), y, 0.5);
  EXPECT_LT((g.head(2) - factor_only).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(TwoPenaltyRidge, RejectsNonPositivePenalty) {
  const AugmentedDesign z{Matrix::Identity(3, 3), 1, {}};
  EXPECT_THROW(two_penalty_ridge(z, Vector::Ones(3), 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(two_penalty_ridge(z, Vector::Ones(3), 1.0, -2.0), std::invalid_argument);
  EXPECT_THROW(two_penalty_ridge(z, Vector::Ones(2), 1.0, 1.0), std::invalid_argument);
}

TEST(TwoPenaltyRidge, ContinuousInPenalties) {
  std::mt19937_64 rng(7);
  const AugmentedDesign z{oracle::random_matrix(40, 10, rng), 3, {}};
  const Vector y = oracle::random_vector(40, rng);
  const Vector g = two_penalty_ridge(z, y, 1.3, 2.1);
  const Vector g2 = two_penalty_ridge(z, y, 1.3 + 1e-8, 2.1 - 1e-8);
  EXPECT_LT((g - g2).norm(), 1e-7);
  EXPECT_GT((g - g2).norm(), 0.0);
}

TEST(CrossValidate, SinglePointGridIsSelected) {
  std::mt19937_64 rng(8);
  const AugmentedDesign z{oracle::random_matrix(20, 6, rng), 2, {}};
  const Vector y = oracle::random_vector(20, rng);
  const PfrFit fit = cross_validate(z, y, {0.7}, {3.0}, 5, 1);
  EXPECT_EQ(fit.tau_f, 0.7);
  EXPECT_EQ(fit.tau_r, 3.0);
  EXPECT_EQ(fit.cv_table.size(), 1u);
  EXPECT_LT((fit.gamma - two_penalty_ridge(z, y, 0.7, 3.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CrossValidate, DuplicatedGridValuesDoNotChangeSelection) {
  std::mt19937_64 rng(9);
  const AugmentedDesign z{oracle::random_matrix(30, 8, rng), 2, {}};
  const Vector y = oracle::random_vector(30, rng);
  const std::vector<double> grid = log_grid(1e-2, 1e2, 5);
  std::vector<double> dup = grid;
  dup.insert(dup.end(), grid.begin(), grid.end());
  std::reverse(dup.begin(), dup.end());
  const PfrFit a = cross_validate(z, y, grid, grid, 5, 11);
  const PfrFit b = cross_validate(z, y, dup, dup, 5, 11);
  EXPECT_EQ(a.tau_f, b.tau_f);
  EXPECT_EQ(a.tau_r, b.tau_r);
  EXPECT_EQ(a.cv_table, b.cv_table);
}

TEST(CrossValidate, TiesBreakTowardLargerPenalties) {
  // zero response: every candidate predicts zero and all CV errors are equal
  std::mt19937_64 rng(10);
  const AugmentedDesign z{oracle::random_matrix(12, 5, rng), 1, {}};
  const PfrFit fit = cross_validate(z, Vector::Zero(12), {1.0, 10.0, 0.1}, {5.0, 0.5}, 3, 2);
  EXPECT_EQ(fit.tau_f, 10.0);
  EXPECT_EQ(fit.tau_r, 5.0);
}

TEST(CrossValidate, SelectionIsTheGridArgmin) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const AugmentedDesign z{oracle::random_matrix(25, 15, rng), 3, {}};
    const Vector y = z.Z.leftCols(3).rowwise().sum() + oracle::random_vector(25, rng);
    const PfrFit fit = cross_validate(z, y, default_penalty_grid(), default_penalty_grid(), 5, rep);
    const double chosen = fit.cv_table.at({fit.tau_f, fit.tau_r});
    for (const auto& [key, err] : fit.cv_table) EXPECT_LE(chosen, err);
    EXPECT_EQ(fit.cv_table.size(), 169u);
    EXPECT_GT(fit.sigma2_hat, 0.0);
  }
}

TEST(CrossValidate, ErrorsMatchExplicitRefits) {
  std::mt19937_64 rng(12);
  const AugmentedDesign z{oracle::random_matrix(18, 7, rng), 2, {}};
  const Vector y = oracle::random_vector(18, rng);
  const PfrFit fit = cross_validate(z, y, {0.5, 2.0}, {0.1, 4.0}, 4, 99);
  const auto fold = fold_assignment(18, 4, 99);
  for (const auto& [key, err] : fit.cv_table) {
    double total = 0.0;
    for (Index f = 0; f < 4; ++f) {
      std::vector<Index> train, test;
      for (Index i = 0; i < 18; ++i) (fold[i] == f ? test : train).push_back(i);
      const Vector g = two_penalty_ridge(z.subset(train), select_rows(y, train), key.first, key.second);
      total += (select_rows(z.Z, test) * g - select_rows(y, test)).squaredNorm() / static_cast<double>(test.size());
    }
    EXPECT_NEAR(err, total / 4.0, 1e-10);
  }
}

TEST(CrossValidate, ArgumentErrors) {
  const AugmentedDesign z{Matrix::Identity(6, 6), 1, {}};
  EXPECT_THROW(cross_validate(z, Vector::Ones(6), {}, {1.0}, 2, 0), std::invalid_argument);
  EXPECT_THROW(cross_validate(z, Vector::Ones(6), {1.0}, {}, 2, 0), std::invalid_argument);
  EXPECT_THROW(cross_validate(z, Vector::Ones(6), {1.0}, {1.0}, 1, 0), std::invalid_argument);
  EXPECT_THROW(cross_validate(z, Vector::Ones(6), {1.0}, {1.0}, 7, 0), std::invalid_argument);
  EXPECT_THROW(cross_validate(z, Vector::Ones(6), {-1.0}, {1.0}, 2, 0), std::invalid_argument);
}

TEST(CrossValidate, FactorOnlySignalPrefersHeavierResidualPenalty) {
  int favoured = 0;
  for (int seed = 0; seed < 50; ++seed) {
    const FactorData d = pure_factor_data(60, 20, 2, 0.25, 1000 + seed);
    const FactorPosterior post = fixed_posterior(d.B, d.Psi, d.X);
    const PfrFit fit = cross_validate(augment(post, d.X), d.y, default_penalty_grid(), default_penalty_grid(), 10, seed);
    if (fit.tau_r >= fit.tau_f) ++favoured;
  }
  EXPECT_GE(favoured, 40);
}

TEST(Predict, ZeroCoefficientsPredictZero) {
  std::mt19937_64 rng(13);
  const Matrix X = oracle::random_matrix(5, 4, rng);
  const FactorPosterior post = fixed_posterior(oracle::random_matrix(4, 2, rng), Vector::Ones(4), X);
  PfrFit fit;
  fit.k = 2;
  fit.gamma = Vector::Zero(6);
  EXPECT_EQ(predict(fit, post, X).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(predict(fit, post, Matrix::Ones(2, 3)), std::invalid_argument);
}

TEST(Predict, TrainingRowReproducesFittedValue) {
  const FactorData d = pure_factor_data(40, 10, 2, 0.5, 14);
  const FactorPosterior post = fixed_posterior(d.B, d.Psi, d.X);
  const AugmentedDesign z = augment(post, d.X);
  const PfrFit fit = cross_validate(z, d.y, default_penalty_grid(), default_penalty_grid(), 5, 3);
  const Vector fitted = predict(fit, z);
  const Vector again = predict(fit, post, d.X.topRows(5));
  EXPECT_LT((again - fitted.head(5)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Predict, PureFactorHeldOutErrorNearNoiseVariance) {
  const Index n = 200, m = 4000;
  const FactorData d = pure_factor_data(n + m, 20, 2, 1.0, 15);
  DataMatrix train = make_data(d.X.topRows(n), Vector(d.y.head(n)));
  train.center();
  PfrOptions options;
  const PfrModel model = fit_partial_factor_regression(train, 2, options, 77);
  Matrix X_test = d.X.bottomRows(m);
  X_test.rowwise() -= train.column_means.transpose();
  const Vector pred = predict(model.fit, model.posterior, X_test).array() + train.y_mean;
  const double mse = (pred - d.y.tail(m)).squaredNorm() / static_cast<double>(m);
  EXPECT_NEAR(mse / d.sigma2, 1.0, 0.1);
}

TEST(Pipeline, NoFactorStructureEqualsCrossValidatedRidge) {
  std::mt19937_64 rng(16);
  const Index n = 40, p = 15;
  const Matrix X = oracle::random_matrix(n, p, rng);
  const Vector y = X.col(0) - X.col(3) + oracle::random_vector(n, rng);
  DataMatrix data = make_data(X, y);
  data.center();
  const FactorPosterior post = fixed_posterior(Matrix::Zero(p, 1), Vector::Ones(p), data.X);
  PfrOptions options;
  options.grid_r = ridge_grid(data.X);
  const PfrModel model = fit_on_posterior(post, data, options, 5);
  const LinearFit ridge = ridge_cv(data.X, data.labeled_y(), options.grid_r, options.folds, 5);
  EXPECT_DOUBLE_EQ(model.fit.tau_r, ridge.tuning.at("tau"));
  const Matrix X_new = oracle::random_matrix(10, p, rng);
  EXPECT_LT((predict(model.fit, model.posterior, X_new) - ridge.predict(X_new)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pipeline, FactorOnlyPinsResidualPenalty) {
  const FactorData d = pure_factor_data(50, 12, 2, 0.5, 17);
  DataMatrix data = make_data(d.X, d.y);
  data.center();
  PfrOptions options;
  options.factor_only = true;
  const PfrModel model = fit_on_posterior(fixed_posterior(d.B, d.Psi, data.X), data, options, 1);
  EXPECT_EQ(model.fit.tau_r, 1e12);
  EXPECT_LT(model.fit.gamma.tail(12).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pipeline, UnlabeledRowsEnterTheDesignButNotTheFit) {
  const FactorData d = pure_factor_data(30, 8, 1, 0.5, 18);
  Vector y = d.y;
  y.tail(10).setConstant(std::numeric_limits<double>::quiet_NaN());
  DataMatrix data = make_data(d.X, y);
  data.center();
  const PfrModel model = fit_on_posterior(fixed_posterior(d.B, d.Psi, data.X), data, PfrOptions{}, 2);
  EXPECT_EQ(model.design.rows(), 30);
  EXPECT_TRUE(model.fit.gamma.allFinite());
  const AugmentedDesign labeled = model.design.subset(data.labeled);
  const PfrFit direct = cross_validate(labeled, data.labeled_y(), default_penalty_grid(), default_penalty_grid(), 10, 2);
  EXPECT_EQ(model.fit.gamma, direct.gamma);
}

TEST(Grid, DefaultGridSpansSixDecades) {
  const auto g = default_penalty_grid();
  ASSERT_EQ(g.size(), 13u);
  EXPECT_NEAR(g.front(), 1e-3, 1e-15);
  EXPECT_NEAR(g.back(), 1e3, 1e-9);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::sqrt(10.0), 1e-12);
}
