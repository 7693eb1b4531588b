// Analytic examples, the misspecified-k Monte Carlo study, the synthetic
// simulation study and the train/test benchmark protocol.
#pragma once

#include "pfr/core_model.hpp"
#include "pfr/factor_sampler.hpp"
#include "pfr/partial_factor_regression.hpp"
#include "pfr/types.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfr {

class UnknownMethodError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Two correlated prices

struct PrincipalComponents {
  Matrix directions;  // columns, ordered by descending variance
  Vector variances;
};

/// Eigendecomposition of the correlation matrix [[1, r], [r, 1]].
PrincipalComponents example1_components(double r);

/// Population regression coefficient of X1 - X2 on the first principal component.
double example1_spread_coefficient(double r);

// ---------------------------------------------------------------------------
// KL projection onto k-factor covariances

/// KL(N(0, S1) || N(0, S2)). Throws std::domain_error for non-PD input.
double kl_gaussian(const Matrix& S1, const Matrix& S2);

enum class ConvergenceStatus { Converged, MaxIterations };

struct KlFactorFit {
  FactorModel<double> model;  // A in `B`, D in `Psi`
  double kl = 0.0;
  std::vector<double> kl_history;  // KL after each iteration
  Index iterations = 0;
  ConvergenceStatus status = ConvergenceStatus::Converged;
};

/// EM on the population covariance; stops when the KL improvement falls below `tol`.
KlFactorFit kl_closest_factor(const Matrix& Sigma, Index k, double tol = 1e-15, Index max_iter = 200000);

/// The ten-dimensional two-factor model with psi = 0.2.
FactorModel<double> example2_truth();

struct Example2Point {
  double delta_loglik;  // true minus approximation
  double delta_mse;     // approximation minus true, predicting X10
};

struct Example2Result {
  double lr_favor_fraction = 0.0;
  double pred_worse_fraction = 0.0;
  double mean_delta_loglik = 0.0;
  double se_delta_loglik = 0.0;
  double mean_delta_mse = 0.0;
  std::vector<Example2Point> scatter;
  KlFactorFit approximation;
};

Example2Result example2_study(Index n_per_replicate, Index replicates, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Simulation study

enum class Scenario { Favorable, Unfavorable };

struct ScenarioConfig {
  Index p = 80;
  Index n = 50;
  Index n_labeled = 35;
  Scenario scenario = Scenario::Unfavorable;
  std::uint64_t seed = 0;
  double noise_variance = 1.0;  // sigma2 of the response
  double theta_scale_dof = 5.0;
  double theta_scale = 1.0;

  void validate() const;
};

struct SimulationDataset {
  DataMatrix data;         // raw predictors; responses NaN on the held-out rows
  Vector response;         // every response, held-out ones included
  PartialFactorModel<double> truth;
  Vector D;                // scale of each loading column before normalization
};

SimulationDataset generate_simulation_dataset(const ScenarioConfig& cfg);

struct MethodMetrics {
  std::string method;
  double percent_best = 0.0;
  double mean_relative_error = 0.0;    // mean of error / minimum error (>= 1)
  double excess_relative_error = 0.0;  // the same minus one
  double overall_mse = 0.0;
  double scaled_mse = 0.0;             // overall_mse / smallest overall_mse
};

struct MetricsTable {
  std::vector<MethodMetrics> rows;
  Index datasets = 0;

  const MethodMetrics& at(const std::string& method) const;
};

/// errors(d, m): mean squared prediction error of method m on dataset d.
MetricsTable compute_metrics(const std::vector<std::string>& methods, const Matrix& errors);

struct SimulationOptions {
  GibbsOptions gibbs;
  std::vector<double> grid_f = default_penalty_grid();
  std::vector<double> grid_r = default_penalty_grid();
  Index folds = 10;
  double variance_fraction = 0.90;
};

struct SimulationReport {
  MetricsTable table;
  Matrix errors;  // completed datasets x methods
  std::vector<Index> k_true;
  std::vector<Index> k_used;
  Index skipped = 0;
  std::vector<std::string> diagnostics;
};

/// Methods drawn from {PFR, NIG, BFR}. Dataset d uses seed derive_seed(seed, d).
SimulationReport simulation_study(Index datasets, const ScenarioConfig& base, const std::vector<std::string>& methods,
                                  std::uint64_t seed, const SimulationOptions& options = {});

// ---------------------------------------------------------------------------
// Train/test benchmark

struct BenchmarkOptions {
  GibbsOptions gibbs;
  std::vector<double> grid_f = default_penalty_grid();
  std::vector<double> grid_r = default_penalty_grid();
  double variance_fraction = 0.90;
  Index k = 0;  // 0 selects k by the variance fraction
  Index max_complexity = 30;
};

struct BenchmarkReport {
  std::vector<std::string> methods;
  std::vector<double> sse;
  std::vector<double> percent_worse;
  std::map<std::string, std::map<std::string, double>> tuning;
  Index n_train = 0;
  Index n_test = 0;
  Index p = 0;
};

/// Methods drawn from {PFR, BFR, RR, PLS, LARS, PCR, NIG}; only labeled rows are used.
BenchmarkReport benchmark_real(const DataMatrix& data, const std::vector<std::string>& methods, double split_fraction,
                               Index folds, std::uint64_t seed, const BenchmarkOptions& options = {});

std::vector<std::string> simulation_methods();
std::vector<std::string> benchmark_methods();

}  // namespace pfr
