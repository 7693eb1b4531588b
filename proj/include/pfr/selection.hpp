// Variable selection and subspace-dimension estimation on the
// Lambda-parametrized partial factor model:
//
//   Y = theta f + Lambda Psi^{-1/2} (X - B f) + eps,   Lambda = (V - theta B') Psi^{-1/2}
//
// Lambda = 0 is the pure factor regression.
#pragma once

#include "pfr/core_model.hpp"
#include "pfr/factor_sampler.hpp"
#include "pfr/random.hpp"
#include "pfr/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pfr {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;
using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct LambdaModel {
  FactorModel<double> base;
  Vector theta;
  Vector Lambda;
  double sigma2 = 1.0;
  Mask inclusion_theta;
  Mask inclusion_lambda;
  MaskMatrix inclusion_B;  // empty unless loading sparsity is enabled

  Index p() const { return base.p(); }
  Index k() const { return base.k(); }
};

struct SubspaceEstimate {
  double prob_lambda_zero = 0.0;
  /// Keys "0".."k" (number of nonzero theta given Lambda = 0) and "H0" (Lambda != 0).
  std::map<std::string, double> rank_distribution;

  std::string modal_rank() const;
};

LambdaModel reparametrize(const PartialFactorModel<double>& m);
PartialFactorModel<double> to_partial_factor(const LambdaModel& m);

/// theta f + Lambda Psi^{-1/2}(x - B f).
double lambda_regression_mean(const LambdaModel& m, const Vector& f, const Vector& x);

/**
 * E(Y | X = x) for a pure factor model through the reduced form
 *
 *   theta_Y [I - M (I + M)^-1] B_Y' Delta^-1 x,   M = B_Y' Delta^-1 B_Y,
 *
 * where B_Y holds the columns with theta_g != 0 and Delta = B_X B_X' + Psi.
 * Throws std::invalid_argument when Lambda is not identically zero.
 */
double conditional_mean_reduced(const LambdaModel& m, const Vector& x);

struct SpikeSlabPriors {
  FactorPriors factor;
  double theta_precision = 1.0;   // slab: theta_g ~ N(0, 1/q)
  double lambda_precision = 1.0;  // slab: lambda_j ~ N(0, 1/w)
  double theta_inclusion = 0.5;
  double lambda_inclusion = 0.5;
  double sigma_shape = 1.0;  // sigma2 ~ IG(shape, rate)
  double sigma_rate = 0.1;
  bool sparse_loadings = false;
  double loading_inclusion = 0.5;

  void validate() const;
};

struct SpikeSlabResult {
  std::vector<LambdaModel> chain;
  SubspaceEstimate estimate;
  double psi_acceptance = 1.0;  // Metropolis acceptance rate of the Psi updates
};

inline constexpr Index kSelectionMaxPredictors = 50;
inline constexpr Index kSelectionMaxRows = 200;

/// Complete sampler state, including latent scores and column precisions.
struct SpikeSlabState {
  FactorState factor;
  Vector theta;
  Vector Lambda;
  double sigma2 = 1.0;
  Mask inclusion_theta;
  Mask inclusion_lambda;
  MaskMatrix inclusion_B;  // empty unless loading sparsity is enabled

  LambdaModel model() const;
};

/// One draw of every parameter (and n rows of scores) from the prior.
SpikeSlabState draw_spike_slab_prior(Index p, Index n, Index k, const SpikeSlabPriors& priors, Rng& rng);

/// Predictors and responses given the state; rows from `n_labeled` on are unlabeled. No centering.
DataMatrix draw_spike_slab_data(const SpikeSlabState& state, Index n_labeled, Rng& rng);

/// One transition of the sampler that spike_slab_sampler iterates.
void spike_slab_sweep(SpikeSlabState& state, const DataMatrix& data, const SpikeSlabPriors& priors, Rng& rng);

/**
 * Gibbs sampler over (B, Psi, xi, F, theta, Lambda, sigma2) and the inclusion
 * indicators of theta and Lambda (and of B when enabled). Psi uses a
 * Metropolis step whose proposal is the factor-model full conditional.
 * Unlabeled rows inform only the factor part.
 */
SpikeSlabResult spike_slab_sampler(const DataMatrix& data, Index k, const SpikeSlabPriors& priors,
                                   const SweepSchedule& schedule, std::uint64_t seed);

SubspaceEstimate estimate_subspace(const std::vector<LambdaModel>& chain);

struct InclusionReport {
  Matrix prob_loading;  // p x k; empty unless loading sparsity was sampled
  Vector prob_lambda;
  Vector prob_theta;
};

InclusionReport three_question_report(const std::vector<LambdaModel>& chain);

/// One line per state: B row-major, Psi, theta, Lambda, sigma2, theta indicators,
/// Lambda indicators, then B indicators row-major when present.
void write_chain(std::ostream& out, const std::vector<LambdaModel>& chain);

}  // namespace pfr
