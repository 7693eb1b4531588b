#include "pfr/experiments.hpp"

#include "pfr/baselines.hpp"
#include "pfr/linalg.hpp"
#include "pfr/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace pfr {

namespace {

void require_methods(const std::vector<std::string>& methods, const std::vector<std::string>& allowed) {
  if (methods.empty()) throw std::invalid_argument("no methods requested");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (std::find(allowed.begin(), allowed.end(), m) == allowed.end()) throw UnknownMethodError("unknown method: " + m);
    if (!seen.insert(m).second) throw std::invalid_argument("duplicate method: " + m);
  }
}

bool wants(const std::vector<std::string>& methods, const char* name) {
  return std::find(methods.begin(), methods.end(), name) != methods.end();
}

double mean_squared(const Vector& v) { return v.size() == 0 ? 0.0 : v.squaredNorm() / static_cast<double>(v.size()); }

// Coefficients of the last coordinate regressed on the others under covariance S.
Vector last_coordinate_coefficients(const Matrix& S) {
  const Index d = S.rows() - 1;
  return S.topLeftCorner(d, d).llt().solve(S.col(d).head(d));
}

}  // namespace

// ---------------------------------------------------------------------------

PrincipalComponents example1_components(double r) {
  if (!(std::abs(r) < 1.0)) throw std::invalid_argument("example1_components: need |r| < 1");
  Matrix R(2, 2);
  R << 1.0, r, r, 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(R);
  PrincipalComponents pc;
  pc.variances = eig.eigenvalues().reverse();
  pc.directions = eig.eigenvectors().rowwise().reverse();
  for (Index c = 0; c < 2; ++c) {
    if (pc.directions(0, c) < 0.0) pc.directions.col(c) *= -1.0;
  }
  return pc;
}

double example1_spread_coefficient(double r) {
  const PrincipalComponents pc = example1_components(r);
  Matrix R(2, 2);
  R << 1.0, r, r, 1.0;
  Vector spread(2);
  spread << 1.0, -1.0;
  const Vector d = pc.directions.col(0);
  return spread.dot(R * d) / d.dot(R * d);
}

// ---------------------------------------------------------------------------

double kl_gaussian(const Matrix& S1, const Matrix& S2) {
  if (S1.rows() != S1.cols() || S2.rows() != S2.cols() || S1.rows() != S2.rows()) {
    throw std::invalid_argument("kl_gaussian: matrices must be square and of equal size");
  }
  if (!is_positive_definite(S1) || !is_positive_definite(S2)) throw std::domain_error("kl_gaussian: inputs must be positive definite");
  const Eigen::LLT<Matrix> l1(S1);
  const Eigen::LLT<Matrix> l2(S2);
  const double logdet1 = 2.0 * Matrix(l1.matrixL()).diagonal().array().log().sum();
  const double logdet2 = 2.0 * Matrix(l2.matrixL()).diagonal().array().log().sum();
  const double trace = l2.solve(S1).trace();
  const double kl = 0.5 * (trace - static_cast<double>(S1.rows()) + logdet2 - logdet1);
  return std::max(kl, 0.0);
}

KlFactorFit kl_closest_factor(const Matrix& Sigma, Index k, double tol, Index max_iter) {
  const Index p = Sigma.rows();
  if (Sigma.cols() != p) throw std::invalid_argument("kl_closest_factor: Sigma must be square");
  if (k < 1 || k >= p) throw std::invalid_argument("kl_closest_factor: need 1 <= k < p");
  if (max_iter < 1) throw std::invalid_argument("kl_closest_factor: max_iter must be positive");
  if (!is_positive_definite(Sigma)) throw std::domain_error("kl_closest_factor: Sigma must be positive definite");

  // start from the principal axes of the correlation matrix
  const Vector sd = Sigma.diagonal().cwiseSqrt();
  const Matrix R = sd.cwiseInverse().asDiagonal() * Sigma * sd.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(R);
  const Vector values = eig.eigenvalues().reverse();
  const Matrix vectors = eig.eigenvectors().rowwise().reverse();
  const double rest = values.tail(p - k).mean();
  // gaps at the level of eigensolver rounding are treated as ties
  const double gap_tol = 64.0 * static_cast<double>(p) * std::numeric_limits<double>::epsilon() * values(0);
  Vector gap = values.head(k).array() - rest;
  for (Index j = 0; j < k; ++j) if (gap(j) <= gap_tol) gap(j) = 0.0;
  Matrix A = sd.asDiagonal() * vectors.leftCols(k) * gap.cwiseSqrt().asDiagonal();
  const double floor = 1e-10 * Sigma.diagonal().maxCoeff();
  Vector D = (Sigma.diagonal() - A.rowwise().squaredNorm()).cwiseMax(floor);

  KlFactorFit out;
  double previous = kl_gaussian(Sigma, marginal_covariance(A, D));
  out.status = ConvergenceStatus::MaxIterations;
  const Matrix I = Matrix::Identity(k, k);
  for (Index it = 1; it <= max_iter; ++it) {
    const FactorCovarianceSolver<double> solver(A, D);
    const Matrix beta = solver.solve(A).transpose();  // k x p
    const Matrix beta_S = beta * Sigma;
    const Matrix Cff = I - beta * A + beta_S * beta.transpose();
    A = beta_S.transpose() * Cff.llt().solve(I);
    D = (Sigma.diagonal() - (A * beta_S).diagonal()).cwiseMax(floor);
    const double kl = kl_gaussian(Sigma, marginal_covariance(A, D));
    out.kl_history.push_back(kl);
    out.iterations = it;
    if (previous - kl < tol) {
      out.status = ConvergenceStatus::Converged;
      previous = kl;
      break;
    }
    previous = kl;
  }
  out.model = FactorModel<double>{A, D};
  out.kl = previous;
  return out;
}

FactorModel<double> example2_truth() {
  Matrix B(10, 2);
  B.col(0) << 0, -4, 0, -8, -4, -6, 1, -1, 4, 0;
  B.col(1) << 1, 0, 0, -1, 0, 1, 0, 1, 0, 1;
  return FactorModel<double>{B, Vector::Constant(10, 0.2)};
}

Example2Result example2_study(Index n_per_replicate, Index replicates, std::uint64_t seed) {
  if (n_per_replicate < 2) throw std::invalid_argument("example2_study: need at least two observations per replicate");
  if (replicates < 100) throw std::invalid_argument("example2_study: need at least 100 replicates");
  const FactorModel<double> truth = example2_truth();
  const Matrix S_true = marginal_covariance(truth);
  Example2Result out;
  out.approximation = kl_closest_factor(S_true, 1);
  const Matrix S_approx = marginal_covariance(out.approximation.model);
  const Vector c_true = last_coordinate_coefficients(S_true);
  const Vector c_approx = last_coordinate_coefficients(S_approx);
  const Matrix L = S_true.llt().matrixL();
  const Index p = S_true.rows();

  out.scatter.reserve(static_cast<std::size_t>(replicates));
  Index favor = 0, worse = 0;
  for (Index r = 0; r < replicates; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    const Matrix X = draw_normal_matrix(n_per_replicate, p, rng) * L.transpose();
    Example2Point pt;
    pt.delta_loglik = log_likelihood(S_true, X) - log_likelihood(S_approx, X);
    const Matrix others = X.leftCols(p - 1);
    const Vector target = X.col(p - 1);
    pt.delta_mse = mean_squared(target - others * c_approx) - mean_squared(target - others * c_true);
    favor += pt.delta_loglik > 0.0;
    worse += pt.delta_mse > 0.0;
    out.scatter.push_back(pt);
  }
  const double R = static_cast<double>(replicates);
  out.lr_favor_fraction = static_cast<double>(favor) / R;
  out.pred_worse_fraction = static_cast<double>(worse) / R;
  double sum = 0.0, sum_sq = 0.0, mse = 0.0;
  for (const auto& pt : out.scatter) {
    sum += pt.delta_loglik;
    sum_sq += pt.delta_loglik * pt.delta_loglik;
    mse += pt.delta_mse;
  }
  out.mean_delta_loglik = sum / R;
  out.mean_delta_mse = mse / R;
  const double var = std::max(sum_sq / R - out.mean_delta_loglik * out.mean_delta_loglik, 0.0) * R / (R - 1.0);
  out.se_delta_loglik = std::sqrt(var / R);
  return out;
}

// ---------------------------------------------------------------------------

void ScenarioConfig::validate() const {
  if (p < 1 || n < 2) throw std::invalid_argument("ScenarioConfig: need p >= 1 and n >= 2");
  if (n_labeled < 1 || n_labeled >= n) throw std::invalid_argument("ScenarioConfig: need 1 <= n_labeled < n");
  if (!(noise_variance > 0.0 && theta_scale > 0.0 && theta_scale_dof > 0.0)) {
    throw std::invalid_argument("ScenarioConfig: noise variance and theta scale must be positive");
  }
}

SimulationDataset generate_simulation_dataset(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Index p = cfg.p;
  // k may not exceed p for a valid loadings matrix
  const Index k = std::uniform_int_distribution<Index>(1, std::min(cfg.n - 1, p))(rng);
  const Matrix A = draw_normal_matrix(p, k, rng);
  Vector D(k);
  for (Index g = 0; g < k; ++g) D(g) = draw_half_cauchy(1.0, rng);
  const Matrix AD = A * D.asDiagonal();
  const Matrix B = AD / AD.norm();
  Vector Psi(p);
  for (Index j = 0; j < p; ++j) {
    do {
      Psi(j) = draw_folded_t(5.0, 0.1, rng);
    } while (!(Psi(j) > 0.0));
  }
  const double scale = draw_folded_t(cfg.theta_scale_dof, cfg.theta_scale, rng);
  Vector theta(k);
  for (Index g = 0; g < k; ++g) theta(g) = scale * draw_normal(rng);

  // pair the g-th largest |D| with the g-th largest (favorable) or smallest (unfavorable) |theta|
  std::vector<Index> by_D(static_cast<std::size_t>(k));
  std::iota(by_D.begin(), by_D.end(), Index{0});
  std::stable_sort(by_D.begin(), by_D.end(), [&](Index a, Index b) { return std::abs(D(a)) > std::abs(D(b)); });
  std::vector<double> values(theta.data(), theta.data() + k);
  std::stable_sort(values.begin(), values.end(), [](double a, double b) { return std::abs(a) > std::abs(b); });
  if (cfg.scenario == Scenario::Unfavorable) std::reverse(values.begin(), values.end());
  Vector paired(k);
  for (Index i = 0; i < k; ++i) paired(by_D[static_cast<std::size_t>(i)]) = values[static_cast<std::size_t>(i)];

  SimulationDataset out;
  out.D = D;
  out.truth = make_factor_regression(FactorModel<double>{B, Psi}, paired, cfg.noise_variance);
  DataMatrix sample = sample_joint(out.truth, cfg.n, derive_seed(cfg.seed, 1));
  out.response = *sample.y;
  Vector y = out.response;
  for (Index i = cfg.n_labeled; i < cfg.n; ++i) y(i) = std::numeric_limits<double>::quiet_NaN();
  out.data = make_data(std::move(sample.X), std::move(y));
  return out;
}

const MethodMetrics& MetricsTable::at(const std::string& method) const {
  for (const auto& row : rows)
    if (row.method == method) return row;
  throw std::out_of_range("MetricsTable: no method " + method);
}

MetricsTable compute_metrics(const std::vector<std::string>& methods, const Matrix& errors) {
  const Index d = errors.rows();
  const Index m = errors.cols();
  if (m != static_cast<Index>(methods.size()) || m == 0) throw std::invalid_argument("compute_metrics: one column per method");
  if (d == 0) throw std::invalid_argument("compute_metrics: no completed datasets");
  MetricsTable table;
  table.datasets = d;
  table.rows.resize(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j) table.rows[static_cast<std::size_t>(j)].method = methods[static_cast<std::size_t>(j)];
  const double inf = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < d; ++i) {
    const double best = errors.row(i).minCoeff();
    const Index ties = (errors.row(i).array() == best).count();
    for (Index j = 0; j < m; ++j) {
      MethodMetrics& row = table.rows[static_cast<std::size_t>(j)];
      const double e = errors(i, j);
      if (e == best) row.percent_best += 100.0 / (static_cast<double>(d) * static_cast<double>(ties));
      const double ratio = best > 0.0 ? e / best : (e == 0.0 ? 1.0 : inf);
      row.mean_relative_error += ratio / static_cast<double>(d);
    }
  }
  double best_overall = inf;
  for (Index j = 0; j < m; ++j) {
    MethodMetrics& row = table.rows[static_cast<std::size_t>(j)];
    row.excess_relative_error = row.mean_relative_error - 1.0;
    row.overall_mse = errors.col(j).mean();
    best_overall = std::min(best_overall, row.overall_mse);
  }
  for (auto& row : table.rows) {
    row.scaled_mse = best_overall > 0.0 ? row.overall_mse / best_overall : (row.overall_mse == 0.0 ? 1.0 : inf);
  }
  return table;
}

std::vector<std::string> simulation_methods() { return {"PFR", "NIG", "BFR"}; }
std::vector<std::string> benchmark_methods() { return {"PFR", "RR", "PLS", "LARS", "PCR", "BFR", "NIG"}; }

SimulationReport simulation_study(Index datasets, const ScenarioConfig& base, const std::vector<std::string>& methods,
                                  std::uint64_t seed, const SimulationOptions& options) {
  require_methods(methods, simulation_methods());
  if (datasets < 1) throw std::invalid_argument("simulation_study: need at least one dataset");
  base.validate();
  GibbsOptions gibbs = options.gibbs;
  gibbs.keep_draws = false;

  SimulationReport report;
  std::vector<Vector> rows;
  for (Index d = 0; d < datasets; ++d) {
    ScenarioConfig cfg = base;
    cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(d));
    try {
      const SimulationDataset ds = generate_simulation_dataset(cfg);
      DataMatrix data = ds.data;
      data.center();  // predictors of every row are visible to the factor model
      const std::vector<Index> held = data.unlabeled();
      const Vector y_held = select_rows(ds.response, held);
      const Index k = choose_k(data.X, options.variance_fraction);

      FactorPosterior posterior;
      if (wants(methods, "PFR") || wants(methods, "BFR")) posterior = gibbs_factor(data.X, k, gibbs, derive_seed(cfg.seed, 2));

      Vector errs(static_cast<Index>(methods.size()));
      for (std::size_t m = 0; m < methods.size(); ++m) {
        Vector pred;
        if (methods[m] == "NIG") {
          // conjugate regression sees only the labeled rows
          Matrix XL = ds.data.labeled_X();
          const Vector means = XL.colwise().mean().transpose();
          XL.rowwise() -= means.transpose();
          const Vector yL = ds.data.labeled_y();
          const double ym = yL.mean();
          const LinearFit fit = nig_regression(XL, yL.array() - ym);
          Matrix Xh = select_rows(ds.data.X, held);
          Xh.rowwise() -= means.transpose();
          pred = fit.predict(Xh).array() + ym;
        } else {
          PfrOptions opts;
          opts.gibbs = gibbs;
          opts.grid_f = options.grid_f;
          opts.grid_r = options.grid_r;
          opts.folds = options.folds;
          opts.factor_only = methods[m] == "BFR";
          const PfrModel model = fit_on_posterior(posterior, data, opts, derive_seed(cfg.seed, 3));
          pred = predict(model.fit, model.design.subset(held)).array() + data.y_mean;
        }
        errs(static_cast<Index>(m)) = mean_squared(pred - y_held);
      }
      if (!errs.allFinite()) throw std::runtime_error("non-finite prediction error");
      rows.push_back(errs);
      report.k_true.push_back(ds.truth.k());
      report.k_used.push_back(k);
    } catch (const std::exception& e) {
      ++report.skipped;
      report.diagnostics.push_back("dataset " + std::to_string(d) + ": " + e.what());
    }
  }
  report.errors.resize(static_cast<Index>(rows.size()), static_cast<Index>(methods.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) report.errors.row(static_cast<Index>(i)) = rows[i].transpose();
  if (!rows.empty()) report.table = compute_metrics(methods, report.errors);
  return report;
}

// ---------------------------------------------------------------------------

BenchmarkReport benchmark_real(const DataMatrix& data, const std::vector<std::string>& methods, double split_fraction,
                               Index folds, std::uint64_t seed, const BenchmarkOptions& options) {
  require_methods(methods, benchmark_methods());
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw std::invalid_argument("benchmark_real: split must lie in (0, 1)");
  if (!data.y) throw std::invalid_argument("benchmark_real: data has no response");
  std::vector<Index> rows = data.labeled;
  const Index n = static_cast<Index>(rows.size());
  if (n < 2) throw std::invalid_argument("benchmark_real: need at least two labeled rows");
  Rng rng(derive_seed(seed, 0));
  std::shuffle(rows.begin(), rows.end(), rng);
  const Index n_train = std::clamp<Index>(std::lround(split_fraction * static_cast<double>(n)), 1, n - 1);
  std::vector<Index> train(rows.begin(), rows.begin() + n_train);
  std::vector<Index> test(rows.begin() + n_train, rows.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  if (n_train < folds) throw std::invalid_argument("benchmark_real: fewer training rows than folds");

  Matrix Xtr = select_rows(data.X, train);
  Matrix Xte = select_rows(data.X, test);
  const Vector ytr_raw = select_rows(*data.y, train);
  const Vector yte = select_rows(*data.y, test);
  const Vector means = Xtr.colwise().mean().transpose();
  const double ym = ytr_raw.mean();
  Xtr.rowwise() -= means.transpose();
  Xte.rowwise() -= means.transpose();
  const Vector ytr = ytr_raw.array() - ym;
  const Index p = Xtr.cols();

  BenchmarkReport report;
  report.methods = methods;
  report.n_train = n_train;
  report.n_test = static_cast<Index>(test.size());
  report.p = p;

  const Index smallest_fold_train = n_train - (n_train + folds - 1) / folds;
  const Index max_complexity = std::max<Index>(1, std::min({options.max_complexity, p, smallest_fold_train - 1}));
  const std::uint64_t cv_seed = derive_seed(seed, 2);

  FactorPosterior posterior;
  bool have_posterior = false;
  Index k = options.k;
  for (const auto& method : methods) {
    Vector pred;
    std::map<std::string, double> tuning;
    if (method == "PFR" || method == "BFR") {
      if (!have_posterior) {
        if (k == 0) k = choose_k(Xtr, options.variance_fraction);
        GibbsOptions gibbs = options.gibbs;
        gibbs.keep_draws = false;
        posterior = gibbs_factor(Xtr, k, gibbs, derive_seed(seed, 1));
        have_posterior = true;
      }
      DataMatrix train_data = make_data(Xtr, ytr);
      train_data.column_means = means;
      train_data.y_mean = ym;
      PfrOptions opts;
      opts.gibbs = options.gibbs;
      opts.grid_f = options.grid_f;
      opts.grid_r = options.grid_r;
      opts.folds = folds;
      opts.factor_only = method == "BFR";
      const PfrModel model = fit_on_posterior(posterior, train_data, opts, cv_seed);
      pred = predict(model.fit, model.posterior, Xte);
      tuning = {{"k", static_cast<double>(k)}, {"tau_f", model.fit.tau_f}, {"tau_r", model.fit.tau_r}};
    } else {
      LinearFit fit;
      if (method == "RR") fit = ridge_cv(Xtr, ytr, ridge_grid(Xtr), folds, cv_seed);
      else if (method == "PLS") fit = pls_cv(Xtr, ytr, max_complexity, folds, cv_seed);
      else if (method == "LARS") fit = lars_cv(Xtr, ytr, max_complexity, folds, cv_seed);
      else if (method == "PCR") fit = pcr_cv(Xtr, ytr, max_complexity, folds, cv_seed);
      else fit = nig_regression(Xtr, ytr);
      pred = fit.predict(Xte);
      tuning = fit.tuning;
    }
    pred.array() += ym;
    report.sse.push_back((pred - yte).squaredNorm());
    report.tuning[method] = std::move(tuning);
  }
  const double best = *std::min_element(report.sse.begin(), report.sse.end());
  for (double s : report.sse) {
    if (best > 0.0) report.percent_worse.push_back(100.0 * (s - best) / best);
    else report.percent_worse.push_back(s == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  }
  return report;
}

}  // namespace pfr
