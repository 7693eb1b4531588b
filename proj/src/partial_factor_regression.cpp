#include "pfr/partial_factor_regression.hpp"

#include "pfr/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pfr {

namespace {

constexpr double kFactorOnlyPenalty = 1e12;

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void check_penalties(double tau_f, double tau_r) {
  if (!(tau_f > 0.0) || !(tau_r > 0.0)) throw std::invalid_argument("penalties must be strictly positive");
}

Vector penalty_diagonal(Index k, Index p, double tau_f, double tau_r) {
  Vector d(k + p);
  d.head(k).setConstant(tau_f);
  d.tail(p).setConstant(tau_r);
  return d;
}

// Ridge coefficients and the trace of the hat matrix.
std::pair<Vector, double> solve_two_penalty(const Matrix& Z, Index k, const Vector& y, double tau_f, double tau_r) {
  const Index n = Z.rows();
  const Index q = Z.cols();
  const Vector d = penalty_diagonal(k, q - k, tau_f, tau_r);
  if (q <= n) {
    Matrix A = Z.transpose() * Z;
    const Matrix gram = A;
    A.diagonal() += d;
    Eigen::LLT<Matrix> llt(A);
    const Vector gamma = llt.solve(Z.transpose() * y);
    const double df = llt.solve(gram).trace();
    return {gamma, df};
  }
  // push-through identity: (Z'Z + D)^-1 Z' = D^-1 Z' (Z D^-1 Z' + I)^-1
  const Vector d_inv = d.cwiseInverse();
  Matrix K = Z * d_inv.asDiagonal() * Z.transpose();
  K.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(K);
  const Vector alpha = llt.solve(y);
  const Vector gamma = d_inv.asDiagonal() * (Z.transpose() * alpha);
  const double df = static_cast<double>(n) - llt.solve(Matrix::Identity(n, n)).trace();
  return {gamma, df};
}

}  // namespace

AugmentedDesign AugmentedDesign::subset(const std::vector<Index>& rows) const {
  return AugmentedDesign{select_rows(Z, rows), k, source};
}

AugmentedDesign augment_with_scores(const Matrix& B, const Vector& Psi, const Matrix& F, const Matrix& X,
                                    std::string source) {
  const Index p = B.rows();
  const Index k = B.cols();
  if (Psi.size() != p || X.cols() != p || F.cols() != k || F.rows() != X.rows()) {
    throw std::invalid_argument("augment: posterior dimensions do not match the predictors");
  }
  if ((Psi.array() <= 0.0).any()) throw std::domain_error("augment: Psi must be positive");
  AugmentedDesign out;
  out.k = k;
  out.source = std::move(source);
  out.Z.resize(X.rows(), k + p);
  out.Z.leftCols(k) = F;
  out.Z.rightCols(p) = (X - F * B.transpose()) * Psi.cwiseSqrt().cwiseInverse().asDiagonal();
  return out;
}

AugmentedDesign augment(const FactorPosterior& post, const Matrix& X) {
  if (post.mean_F.rows() != X.rows()) {
    throw std::invalid_argument("augment: posterior scores do not cover these rows; use augment_new");
  }
  return augment_with_scores(post.mean_B, post.mean_Psi, post.mean_F, X, "posterior-mean");
}

AugmentedDesign augment(const FactorPosterior& post, const DataMatrix& data) { return augment(post, data.X); }

AugmentedDesign augment_new(const FactorPosterior& post, const Matrix& X_new) {
  if (X_new.cols() != post.p()) throw std::invalid_argument("augment_new: column count does not match the posterior");
  const Matrix F = factor_score_means(post.mean_B, post.mean_Psi, X_new);
  return augment_with_scores(post.mean_B, post.mean_Psi, F, X_new, "conditional-mean");
}

FactorPosterior fixed_posterior(const Matrix& B, const Vector& Psi, const Matrix& X) {
  FactorPosterior post;
  post.mean_B = B;
  post.mean_Psi = Psi;
  post.mean_F = factor_score_means(B, Psi, X);
  post.B_init = B;
  return post;
}

Vector two_penalty_ridge(const AugmentedDesign& design, const Vector& y, double tau_f, double tau_r) {
  check_penalties(tau_f, tau_r);
  if (y.size() != design.rows()) throw std::invalid_argument("two_penalty_ridge: response length mismatch");
  return solve_two_penalty(design.Z, design.k, y, tau_f, tau_r).first;
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi >= lo) || count == 0) throw std::invalid_argument("log_grid: need 0 < lo <= hi and count > 0");
  std::vector<double> g(count);
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    g[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return g;
}

std::vector<double> default_penalty_grid() { return log_grid(1e-3, 1e3, 13); }

PfrFit cross_validate(const AugmentedDesign& design, const Vector& y, const std::vector<double>& grid_f,
                      const std::vector<double>& grid_r, Index folds, std::uint64_t seed) {
  if (grid_f.empty() || grid_r.empty()) throw std::invalid_argument("cross_validate: empty penalty grid");
  for (double t : grid_f) check_penalties(t, 1.0);
  for (double t : grid_r) check_penalties(1.0, t);
  const Index n = design.rows();
  if (y.size() != n) throw std::invalid_argument("cross_validate: response length mismatch");
  const std::vector<Index> fold = fold_assignment(n, folds, seed);
  const std::vector<double> tf_values = sorted_unique(grid_f);
  const std::vector<double> tr_values = sorted_unique(grid_r);
  const Index k = design.k;
  const Matrix Zf = design.Z.leftCols(k);
  const Matrix Zr = design.Z.rightCols(design.p());

  // Held-out predictions only need Gram blocks in the dual form.
  const Matrix Gf = Zf * Zf.transpose();
  const Matrix Gr = Zr * Zr.transpose();

  Matrix sse = Matrix::Zero(static_cast<Index>(tf_values.size()), static_cast<Index>(tr_values.size()));
  for (Index f = 0; f < folds; ++f) {
    std::vector<Index> train, test;
    for (Index i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    const Index nt = static_cast<Index>(train.size());
    const Index ns = static_cast<Index>(test.size());
    Matrix Gf_tt(nt, nt), Gr_tt(nt, nt), Gf_st(ns, nt), Gr_st(ns, nt);
    for (Index a = 0; a < nt; ++a) {
      for (Index b = 0; b < nt; ++b) {
        Gf_tt(a, b) = Gf(train[a], train[b]);
        Gr_tt(a, b) = Gr(train[a], train[b]);
      }
      for (Index s = 0; s < ns; ++s) {
        Gf_st(s, a) = Gf(test[s], train[a]);
        Gr_st(s, a) = Gr(test[s], train[a]);
      }
    }
    const Vector y_t = select_rows(y, train);
    const Vector y_s = select_rows(y, test);
    for (std::size_t a = 0; a < tf_values.size(); ++a) {
      for (std::size_t b = 0; b < tr_values.size(); ++b) {
        const double tf = tf_values[a];
        const double tr = tr_values[b];
        Matrix K = Gf_tt / tf + Gr_tt / tr;
        K.diagonal().array() += 1.0;
        const Vector alpha = K.llt().solve(y_t);
        const Vector pred = (Gf_st / tf + Gr_st / tr) * alpha;
        sse(static_cast<Index>(a), static_cast<Index>(b)) += (pred - y_s).squaredNorm() / static_cast<double>(ns);
      }
    }
  }

  PfrFit fit;
  fit.k = k;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < tf_values.size(); ++a) {
    for (std::size_t b = 0; b < tr_values.size(); ++b) {
      const double err = sse(static_cast<Index>(a), static_cast<Index>(b)) / static_cast<double>(folds);
      fit.cv_table[{tf_values[a], tr_values[b]}] = err;
      // ascending traversal: "<=" keeps the largest pair among ties
      if (err <= best) {
        best = err;
        fit.tau_f = tf_values[a];
        fit.tau_r = tr_values[b];
      }
    }
  }

  auto [gamma, df] = solve_two_penalty(design.Z, k, y, fit.tau_f, fit.tau_r);
  fit.gamma = std::move(gamma);
  fit.effective_df = df;
  const double rss = (design.Z * fit.gamma - y).squaredNorm();
  const double dof = std::max(static_cast<double>(n) - df, 1e-8);
  fit.sigma2_hat = rss / dof;
  return fit;
}

Vector predict(const PfrFit& fit, const AugmentedDesign& design) {
  if (design.Z.cols() != fit.gamma.size() || design.k != fit.k) {
    throw std::invalid_argument("predict: design does not match the fitted coefficients");
  }
  return design.Z * fit.gamma;
}

Vector predict(const PfrFit& fit, const FactorPosterior& post, const Matrix& X_new) {
  return predict(fit, augment_new(post, X_new));
}

PfrModel fit_on_posterior(FactorPosterior posterior, const DataMatrix& train, const PfrOptions& options,
                          std::uint64_t seed) {
  if (!train.y || train.labeled.empty()) throw std::invalid_argument("partial factor regression needs labeled rows");
  PfrModel model;
  model.design = augment(posterior, train.X);
  model.posterior = std::move(posterior);
  const AugmentedDesign labeled = model.design.subset(train.labeled);
  const std::vector<double> grid_r = options.factor_only ? std::vector<double>{kFactorOnlyPenalty} : options.grid_r;
  model.fit = cross_validate(labeled, train.labeled_y(), options.grid_f, grid_r, options.folds, seed);
  return model;
}

PfrModel fit_partial_factor_regression(const DataMatrix& train, Index k, const PfrOptions& options,
                                       std::uint64_t seed) {
  FactorPosterior post = gibbs_factor(train.X, k, options.gibbs, derive_seed(seed, 0));
  return fit_on_posterior(std::move(post), train, options, derive_seed(seed, 1));
}

}  // namespace pfr
