#include "pfr/factor_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace pfr {

namespace {

// Number of unconstrained loadings in row j.
Index free_in_row(Index j, Index k, Identification ident) {
  return ident == Identification::LowerTriangular ? std::min(j + 1, k) : k;
}

// Number of unconstrained loadings in column g.
Index free_in_column(Index g, Index p, Identification ident) {
  return ident == Identification::LowerTriangular ? p - g : p;
}

bool diagonal_constrained(Index j, Index k, Identification ident) {
  return ident == Identification::LowerTriangular && j < k;
}

void sample_scores(FactorState& s, const Matrix& X, Rng& rng) {
  const Index n = X.rows();
  const Index k = s.B.cols();
  const Matrix scaled_B = s.Psi.cwiseInverse().asDiagonal() * s.B;  // Psi^-1 B
  Matrix precision = Matrix::Identity(k, k);
  precision.noalias() += s.B.transpose() * scaled_B;
  Eigen::LLT<Matrix> llt(precision);
  const Matrix means = llt.solve((X * scaled_B).transpose()).transpose();  // n x k
  const Matrix noise = draw_normal_matrix(k, n, rng);
  s.F = means + llt.matrixU().solve(noise).transpose();
}

void sample_loadings(FactorState& s, const Matrix& X, Identification ident, Rng& rng) {
  const Index p = X.cols();
  const Index k = s.B.cols();
  const Matrix FtF = s.F.transpose() * s.F;
  const Matrix FtX = s.F.transpose() * X;  // k x p
  for (Index j = 0; j < p; ++j) {
    const Index m = free_in_row(j, k, ident);
    Matrix P = FtF.topLeftCorner(m, m);
    P.diagonal() += s.xi.head(m);
    const Vector h = FtX.col(j).head(m);
    const double psi = s.Psi(j);
    if (!diagonal_constrained(j, k, ident)) {
      Eigen::LLT<Matrix> llt(P / psi);
      const Vector mean = llt.solve(h / psi);
      s.B.row(j).head(m) = draw_from_precision(mean, llt, rng).transpose();
      continue;
    }
    // Diagonal entry d = m-1 is truncated at zero; block-Gibbs the rest given it.
    const Index d = m - 1;
    const double bd_old = std::max(s.B(j, d), 0.0);
    Vector b(m);
    b(d) = bd_old;
    if (d > 0) {
      const Matrix Paa = P.topLeftCorner(d, d);
      const Vector rhs = h.head(d) - P.topRightCorner(d, 1) * bd_old;
      Eigen::LLT<Matrix> llt(Paa / psi);
      const Vector mean = llt.solve(rhs / psi);
      b.head(d) = draw_from_precision(mean, llt, rng);
    }
    const double Pdd = P(d, d);
    const double cond_mean = (h(d) - (d > 0 ? P.row(d).head(d).dot(b.head(d)) : 0.0)) / Pdd;
    b(d) = draw_truncated_normal_positive(cond_mean, std::sqrt(psi / Pdd), rng);
    s.B.row(j).head(m) = b.transpose();
  }
}

void sample_precisions(FactorState& s, const FactorPriors& priors, Identification ident, Rng& rng) {
  const Index p = s.B.rows();
  const Index k = s.B.cols();
  const Vector psi_inv = s.Psi.cwiseInverse();
  for (Index g = 0; g < k; ++g) {
    const double ss = s.B.col(g).cwiseAbs2().dot(psi_inv);
    const double shape = priors.xi_shape + 0.5 * static_cast<double>(free_in_column(g, p, ident));
    s.xi(g) = draw_gamma(shape, priors.xi_rate + 0.5 * ss, rng);
  }
}

void sample_idiosyncratic(FactorState& s, const Matrix& X, const FactorPriors& priors, Identification ident,
                          Rng& rng) {
  const Index n = X.rows();
  const Index p = X.cols();
  const Index k = s.B.cols();
  const Matrix resid = X - s.F * s.B.transpose();
  for (Index j = 0; j < p; ++j) {
    const Index m = free_in_row(j, k, ident);
    const double prior_ss = s.B.row(j).head(m).cwiseAbs2().dot(s.xi.head(m));
    const double shape = priors.psi_shape + 0.5 * static_cast<double>(n + m);
    const double rate = priors.psi_rate + 0.5 * (resid.col(j).squaredNorm() + prior_ss);
    s.Psi(j) = draw_inverse_gamma(shape, rate, rng);
  }
}

}  // namespace

void FactorPriors::validate() const {
  if (!(xi_shape > 0 && xi_rate > 0 && psi_shape > 0 && psi_rate > 0)) {
    throw std::invalid_argument("FactorPriors: all hyperparameters must be positive");
  }
}

void SweepSchedule::validate() const {
  if (total < 1 || burn_in < 0 || thin < 1 || burn_in >= total) {
    throw std::invalid_argument("SweepSchedule: need total > burn_in >= 0 and thin >= 1");
  }
}

Index SweepSchedule::retained() const { return (total - burn_in + thin - 1) / thin; }

ScoreConditional factor_score_conditional(const Matrix& B, const Vector& Psi, const Vector& x) {
  if (Psi.size() != B.rows() || x.size() != B.rows()) {
    throw std::invalid_argument("factor_score_conditional: dimension mismatch");
  }
  if ((Psi.array() <= 0.0).any()) throw std::domain_error("factor_score_conditional: Psi must be positive");
  const Index k = B.cols();
  const Matrix scaled_B = Psi.cwiseInverse().asDiagonal() * B;
  Matrix precision = Matrix::Identity(k, k);
  precision.noalias() += B.transpose() * scaled_B;
  Eigen::LLT<Matrix> llt(precision);
  ScoreConditional out;
  out.covariance = llt.solve(Matrix::Identity(k, k));
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.mean = llt.solve(scaled_B.transpose() * x);
  return out;
}

Matrix factor_score_means(const Matrix& B, const Vector& Psi, const Matrix& X) {
  if (Psi.size() != B.rows() || X.cols() != B.rows()) {
    throw std::invalid_argument("factor_score_means: dimension mismatch");
  }
  const Index k = B.cols();
  const Matrix scaled_B = Psi.cwiseInverse().asDiagonal() * B;
  Matrix precision = Matrix::Identity(k, k);
  precision.noalias() += B.transpose() * scaled_B;
  Eigen::LLT<Matrix> llt(precision);
  return llt.solve((X * scaled_B).transpose()).transpose();
}

Matrix rotate_to_lower_triangular(const Matrix& B) {
  const Index k = B.cols();
  if (k == 0) return B;
  if (B.rows() < k) throw std::invalid_argument("rotate_to_lower_triangular: need p >= k");
  // B1' = Q R  =>  B1 Q = R' is lower-triangular
  Eigen::HouseholderQR<Matrix> qr(B.topRows(k).transpose());
  const Matrix Q = qr.householderQ();
  Matrix rotated = B * Q;
  for (Index g = 0; g < k; ++g) {
    if (rotated(g, g) < 0) rotated.col(g) *= -1.0;
    for (Index j = 0; j < g; ++j) rotated(j, g) = 0.0;
  }
  return rotated;
}

FactorState initial_state(const Matrix& X, Index k, const FactorPriors& priors, Identification ident) {
  const Index n = X.rows();
  const Index p = X.cols();
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinV);
  const Vector eig = svd.singularValues().cwiseAbs2() / static_cast<double>(n);
  const Index total = eig.size();
  // probabilistic-PCA start: loadings scaled by the excess over the mean trailing eigenvalue
  const double trailing = (total > k) ? eig.tail(total - k).sum() / static_cast<double>(p - k) : 0.0;
  Matrix B0 = Matrix::Zero(p, k);
  for (Index g = 0; g < std::min(k, total); ++g) {
    B0.col(g) = svd.matrixV().col(g) * std::sqrt(std::max(eig(g) - trailing, 0.0));
  }
  if (ident == Identification::LowerTriangular) B0 = rotate_to_lower_triangular(B0);
  const Vector col_var = X.colwise().squaredNorm().transpose() / static_cast<double>(n);
  Vector Psi0(p);
  for (Index j = 0; j < p; ++j) {
    const double floor = std::max(0.1 * col_var(j), 1e-6);
    Psi0(j) = std::max(col_var(j) - B0.row(j).squaredNorm(), floor);
  }
  FactorState s;
  s.B = B0;
  s.Psi = Psi0;
  s.xi = Vector::Constant(k, priors.xi_shape / priors.xi_rate);
  s.F = factor_score_means(B0, Psi0, X);
  return s;
}

void gibbs_sweep(FactorState& state, const Matrix& X, const FactorPriors& priors, Identification ident, Rng& rng) {
  sample_scores(state, X, rng);
  sample_loadings(state, X, ident, rng);
  sample_precisions(state, priors, ident, rng);
  sample_idiosyncratic(state, X, priors, ident, rng);
}

FactorState draw_from_prior(Index p, Index n, Index k, const FactorPriors& priors, Identification ident, Rng& rng) {
  FactorState s;
  s.xi.resize(k);
  for (Index g = 0; g < k; ++g) s.xi(g) = draw_gamma(priors.xi_shape, priors.xi_rate, rng);
  s.Psi.resize(p);
  for (Index j = 0; j < p; ++j) s.Psi(j) = draw_inverse_gamma(priors.psi_shape, priors.psi_rate, rng);
  s.B = Matrix::Zero(p, k);
  for (Index j = 0; j < p; ++j) {
    const Index m = free_in_row(j, k, ident);
    for (Index g = 0; g < m; ++g) {
      const double sd = std::sqrt(s.Psi(j) / s.xi(g));
      double b = sd * draw_normal(rng);
      if (diagonal_constrained(j, k, ident) && g == j) b = std::abs(b);
      s.B(j, g) = b;
    }
  }
  s.F = draw_normal_matrix(n, k, rng);
  return s;
}

Matrix draw_predictors(const FactorState& state, Rng& rng) {
  const Index n = state.F.rows();
  const Index p = state.B.rows();
  Matrix X = state.F * state.B.transpose();
  const Vector sd = state.Psi.cwiseSqrt();
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) X(i, j) += sd(j) * draw_normal(rng);
  return X;
}

FactorPosterior gibbs_factor(const DataMatrix& data, Index k, const GibbsOptions& options, std::uint64_t seed) {
  return gibbs_factor(data.X, k, options, seed);
}

FactorPosterior gibbs_factor(const Matrix& X, Index k, const GibbsOptions& options, std::uint64_t seed) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (k < 1) throw std::invalid_argument("gibbs_factor: k must be at least 1");
  if (k > n) throw std::invalid_argument("gibbs_factor: k must not exceed the number of rows");
  if (k > p) throw std::invalid_argument("gibbs_factor: k must not exceed the number of columns");
  if (!is_centered(X)) throw std::invalid_argument("gibbs_factor: predictors must be centered");
  options.priors.validate();
  options.schedule.validate();

  Rng rng(seed);
  FactorState state = initial_state(X, k, options.priors, options.identification);

  FactorPosterior post;
  post.B_init = state.B;
  post.n_burn = options.schedule.burn_in;
  post.thin = options.schedule.thin;
  post.mean_B = Matrix::Zero(p, k);
  post.mean_Psi = Vector::Zero(p);
  post.mean_F = Matrix::Zero(n, k);
  if (options.keep_draws) post.draws.reserve(static_cast<std::size_t>(options.schedule.retained()));

  for (Index sweep = 0; sweep < options.schedule.total; ++sweep) {
    gibbs_sweep(state, X, options.priors, options.identification, rng);
    if (sweep < options.schedule.burn_in) continue;
    if ((sweep - options.schedule.burn_in) % options.schedule.thin != 0) continue;
    post.mean_B += state.B;
    post.mean_Psi += state.Psi;
    post.mean_F += state.F;
    ++post.n_keep;
    if (options.keep_draws) post.draws.push_back({state.B, state.Psi, state.F});
  }
  const double inv = 1.0 / static_cast<double>(post.n_keep);
  post.mean_B *= inv;
  post.mean_Psi *= inv;
  post.mean_F *= inv;
  return post;
}

Index choose_k(const Matrix& X, double variance_fraction) {
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0)) {
    throw std::invalid_argument("choose_k: variance_fraction must lie in (0, 1]");
  }
  Eigen::BDCSVD<Matrix> svd(X);
  const Vector s2 = svd.singularValues().cwiseAbs2();
  const double total = s2.sum();
  if (!(total > 0.0)) throw std::invalid_argument("choose_k: design matrix is identically zero");
  const double target = variance_fraction * total * (1.0 - 1e-12);
  double cumulative = 0.0;
  for (Index i = 0; i < s2.size(); ++i) {
    cumulative += s2(i);
    if (cumulative >= target) return i + 1;
  }
  return s2.size();
}

void write_draws(std::ostream& out, const FactorPosterior& posterior) {
  out << std::setprecision(17);
  for (const auto& d : posterior.draws) {
    bool first = true;
    auto put = [&](double v) {
      if (!first) out << ',';
      out << v;
      first = false;
    };
    for (Index j = 0; j < d.B.rows(); ++j)
      for (Index g = 0; g < d.B.cols(); ++g) put(d.B(j, g));
    for (Index j = 0; j < d.Psi.size(); ++j) put(d.Psi(j));
    for (Index i = 0; i < d.F.rows(); ++i)
      for (Index g = 0; g < d.F.cols(); ++g) put(d.F(i, g));
    out << '\n';
  }
}

}  // namespace pfr
