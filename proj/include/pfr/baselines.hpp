// Reference estimators: ridge, g-prior, covariance-informed ridge, conjugate
// regression with an unknown ridge parameter, PCR, PLS and LARS.
//
// Every function takes an n x p design with rows as observations; X and y
// are assumed centered, so fitted intercepts are zero.
#pragma once

#include "pfr/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pfr {

enum class FitStatus { Ok, EarlyStop };

struct LinearFit {
  Vector beta;
  double intercept = 0.0;
  std::string method;
  std::map<std::string, double> tuning;
  FitStatus status = FitStatus::Ok;
  std::string message;

  Vector predict(const Matrix& X) const { return (X * beta).array() + intercept; }
};

/// (X'X + tau I)^-1 X'y. tau = 0 is allowed only when X'X is nonsingular.
Vector ridge_estimator(const Matrix& X, const Vector& y, double tau);

/// Minimum-norm least squares via the pseudo-inverse (singular values below 1e-10 * max dropped).
Vector least_squares(const Matrix& X, const Vector& y);

/// Zellner g-prior posterior mean: least_squares / (1 + g).
Vector gprior_estimator(const Matrix& X, const Vector& y, double g);

/**
 * Posterior mean under beta ~ N(Sigma_X^-1 V0, sigma2/tau Sigma_X^-1):
 *
 *   (X'X + tau Sigma_X)^-1 (X'y + tau V0)
 *
 * sigma2 cancels from the mean; it is validated but otherwise unused.
 */
Vector covariance_ridge(const Matrix& X, const Vector& y, const Matrix& Sigma_X, const Vector& V0, double tau,
                        double sigma2);

struct WhitenedPair {
  Vector beta_direct;
  Vector beta_whitened;
};

/// Fit covariance_ridge (V0 = 0) directly and as isotropic ridge on whitened
/// predictors X U^-1 (Sigma_X = U'U), back-transformed by U^-1.
WhitenedPair whiten_equivalence_check(const Matrix& X, const Vector& y, const Matrix& Sigma_X, double tau,
                                      double sigma2);

struct NigPrior {
  double a = 1.0;  // sigma2 ~ IG(a, b)
  double b = 1.0;
  std::vector<double> tau_grid;  // support of the ridge-parameter prior
  std::vector<double> tau_weights;

  /// 21 log-spaced points on [1e-3, 1e3], uniform weights.
  static NigPrior standard();
};

/// Posterior mean of beta under beta | sigma2, tau ~ N(0, sigma2/tau I) with
/// tau integrated over a discrete prior, each grid point weighted by its
/// marginal likelihood.
LinearFit nig_regression(const Matrix& X, const Vector& y, const NigPrior& prior = NigPrior::standard());

/// Least squares on the leading `components` singular directions of X.
LinearFit pcr(const Matrix& X, const Vector& y, Index components);

/// Univariate-response NIPALS partial least squares.
LinearFit pls(const Matrix& X, const Vector& y, Index components);

/// Least angle regression (no lasso modification) after `steps` steps.
/// Predictors are scaled to unit norm internally; coefficients are on the input scale.
LinearFit lars(const Matrix& X, const Vector& y, Index steps);

// Cross-validated wrappers used by the benchmark harness.
LinearFit ridge_cv(const Matrix& X, const Vector& y, const std::vector<double>& grid, Index folds, std::uint64_t seed);
LinearFit pcr_cv(const Matrix& X, const Vector& y, Index max_components, Index folds, std::uint64_t seed);
LinearFit pls_cv(const Matrix& X, const Vector& y, Index max_components, Index folds, std::uint64_t seed);
LinearFit lars_cv(const Matrix& X, const Vector& y, Index max_steps, Index folds, std::uint64_t seed);

/// Ridge grid scaled to the design: 25 log-spaced values times ||X||_F^2 / p.
std::vector<double> ridge_grid(const Matrix& X);

}  // namespace pfr
