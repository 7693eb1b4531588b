// Gibbs sampler for the Bayesian factor model of the predictors.
//
//   x_i | B, f_i, Psi ~ N(B f_i, Psi),       f_i ~ N(0, I_k)
//   b_jg | psi_j, xi_g ~ N(0, psi_j / xi_g)
//   xi_g ~ Gamma(xi_shape, xi_rate),         psi_j ~ IG(psi_shape, psi_rate)
//
// Identification fixes B lower-triangular with a nonnegative diagonal.
#pragma once

#include "pfr/random.hpp"
#include "pfr/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace pfr {

struct FactorPriors {
  double xi_shape = 2.0;
  double xi_rate = 2.0;
  double psi_shape = 2.0;
  double psi_rate = 0.2;

  void validate() const;
};

struct SweepSchedule {
  Index total = 2000;
  Index burn_in = 1000;
  Index thin = 1;

  void validate() const;
  Index retained() const;
};

enum class Identification {
  LowerTriangular,  // b_jg = 0 for g > j, b_jj >= 0
  None,             // unconstrained; only rotation-invariant summaries are meaningful
};

struct GibbsOptions {
  FactorPriors priors;
  SweepSchedule schedule;
  Identification identification = Identification::LowerTriangular;
  bool keep_draws = true;
};

/// Complete sampler state, including the column precisions xi.
struct FactorState {
  Matrix B;    // p x k
  Vector Psi;  // p
  Vector xi;   // k
  Matrix F;    // n x k
};

struct FactorDraw {
  Matrix B;
  Vector Psi;
  Matrix F;
};

struct FactorPosterior {
  std::vector<FactorDraw> draws;  // empty when keep_draws was false
  Matrix mean_B;
  Vector mean_Psi;
  Matrix mean_F;
  Matrix B_init;
  Index n_burn = 0;
  Index n_keep = 0;
  Index thin = 1;

  Index p() const { return mean_B.rows(); }
  Index k() const { return mean_B.cols(); }
};

struct ScoreConditional {
  Vector mean;
  Matrix covariance;
};

/// f | x, B, Psi ~ N((I + B'Psi^-1 B)^-1 B'Psi^-1 x, (I + B'Psi^-1 B)^-1).
ScoreConditional factor_score_conditional(const Matrix& B, const Vector& Psi, const Vector& x);

/// Conditional means for every row of X (n x k).
Matrix factor_score_means(const Matrix& B, const Vector& Psi, const Matrix& X);

/// Rotate B so that its top k x k block is lower-triangular with nonnegative diagonal.
Matrix rotate_to_lower_triangular(const Matrix& B);

/// Deterministic starting state: principal components of X, rotated as required.
FactorState initial_state(const Matrix& X, Index k, const FactorPriors& priors, Identification ident);

/// One full sweep: F, rows of B, xi, Psi.
void gibbs_sweep(FactorState& state, const Matrix& X, const FactorPriors& priors, Identification ident, Rng& rng);

/// Draw (B, Psi, xi, F) from the prior, respecting the identification constraint.
FactorState draw_from_prior(Index p, Index n, Index k, const FactorPriors& priors, Identification ident, Rng& rng);

/// Draw X | B, F, Psi.
Matrix draw_predictors(const FactorState& state, Rng& rng);

FactorPosterior gibbs_factor(const DataMatrix& data, Index k, const GibbsOptions& options, std::uint64_t seed);
FactorPosterior gibbs_factor(const Matrix& X, Index k, const GibbsOptions& options, std::uint64_t seed);

/// Smallest k whose top-k squared singular values reach `variance_fraction` of the total.
Index choose_k(const Matrix& X, double variance_fraction);

/// One text line per retained draw: B row-major, Psi, F row-major; comma separated.
void write_draws(std::ostream& out, const FactorPosterior& posterior);

}  // namespace pfr
