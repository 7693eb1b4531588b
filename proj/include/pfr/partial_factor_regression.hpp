// Partial factor regression: ridge on the augmented design Z = [f, r] with
// separate penalties on the factor block and on the standardized residuals
// r = Psi^{-1/2}(x - B f).
#pragma once

#include "pfr/cross_validation.hpp"
#include "pfr/factor_sampler.hpp"
#include "pfr/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pfr {

struct AugmentedDesign {
  Matrix Z;  // n x (k + p)
  Index k = 0;
  std::string source;

  Index rows() const { return Z.rows(); }
  Index p() const { return Z.cols() - k; }
  AugmentedDesign subset(const std::vector<Index>& rows) const;
};

struct PfrFit {
  Vector gamma;
  Index k = 0;
  double tau_f = 0.0;
  double tau_r = 0.0;
  double sigma2_hat = 0.0;
  double effective_df = 0.0;
  std::map<std::pair<double, double>, double> cv_table;
};

/// Z = [F, (X - F B') Psi^{-1/2}] for explicit scores.
AugmentedDesign augment_with_scores(const Matrix& B, const Vector& Psi, const Matrix& F, const Matrix& X,
                                    std::string source = {});

/// Training rows: scores are the posterior means carried by `post`.
AugmentedDesign augment(const FactorPosterior& post, const Matrix& X);
AugmentedDesign augment(const FactorPosterior& post, const DataMatrix& data);

/// Rows outside the sampled set: scores are the conditional means under (mean_B, mean_Psi).
AugmentedDesign augment_new(const FactorPosterior& post, const Matrix& X_new);

/// A posterior concentrated at fixed (B, Psi); its scores are the conditional means of X.
FactorPosterior fixed_posterior(const Matrix& B, const Vector& Psi, const Matrix& X);

/// gamma = (Z'Z + D)^-1 Z'y, D = diag(tau_f 1_k, tau_r 1_p).
Vector two_penalty_ridge(const AugmentedDesign& design, const Vector& y, double tau_f, double tau_r);

/// 13 log-spaced values from 1e-3 to 1e3.
std::vector<double> default_penalty_grid();
std::vector<double> log_grid(double lo, double hi, std::size_t count);

/**
 * Exhaustive K-fold search over grid_f x grid_r followed by a refit on all
 * rows at the selected pair. Folds are a seeded shuffle of the rows; the
 * lexicographically larger (tau_f, tau_r) wins ties.
 */
PfrFit cross_validate(const AugmentedDesign& design, const Vector& y, const std::vector<double>& grid_f,
                      const std::vector<double>& grid_r, Index folds, std::uint64_t seed);

Vector predict(const PfrFit& fit, const AugmentedDesign& design);
Vector predict(const PfrFit& fit, const FactorPosterior& post, const Matrix& X_new);

struct PfrOptions {
  GibbsOptions gibbs;
  std::vector<double> grid_f = default_penalty_grid();
  std::vector<double> grid_r = default_penalty_grid();
  Index folds = 10;
  /// Pin tau_r at 1e12, which removes the residual block (factor-only regression).
  bool factor_only = false;
};

/// Output of the end-to-end pipeline on a centered DataMatrix.
struct PfrModel {
  FactorPosterior posterior;
  AugmentedDesign design;  // every row of the training data, labeled or not
  PfrFit fit;
};

/**
 * Sample the factor model on all rows of `train` (labeled and unlabeled),
 * then cross-validate the two-penalty ridge on the labeled rows.
 */
PfrModel fit_partial_factor_regression(const DataMatrix& train, Index k, const PfrOptions& options, std::uint64_t seed);

/// Refit on an existing posterior (used to share one sampler run between PFR and its factor-only variant).
PfrModel fit_on_posterior(FactorPosterior posterior, const DataMatrix& train, const PfrOptions& options,
                          std::uint64_t seed);

}  // namespace pfr
