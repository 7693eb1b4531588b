// Independent reference computations used by the tests. Everything here goes
// through dense inverses and textbook formulas rather than the library code.
#pragma once

#include "pfr/core_model.hpp"
#include "pfr/types.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using pfr::Index;
using pfr::Matrix;
using pfr::Vector;

inline Matrix dense_inverse(const Matrix& A) { return A.fullPivLu().inverse(); }

inline Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix M(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) M(i, j) = z(rng);
  return M;
}

inline Vector random_vector(Index n, std::mt19937_64& rng) { return random_matrix(n, 1, rng).col(0); }

inline Vector random_positive(Index n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline Matrix random_spd(Index p, std::mt19937_64& rng) {
  const Matrix A = random_matrix(p, p, rng);
  Matrix S = A * A.transpose();
  S.diagonal().array() += 0.5;
  return S;
}

/// Random valid partial factor model whose residual variance is at least `min_sigma2`.
inline pfr::PartialFactorModel<double> random_partial_model(Index p, Index k, std::mt19937_64& rng, double min_sigma2 = 0.5) {
  pfr::FactorModel<double> base{random_matrix(p, k, rng), random_positive(p, 0.3, 2.0, rng)};
  const Vector theta = random_vector(k, rng);
  const Vector V = random_vector(p, rng);
  const Vector lambda = (V - base.B * theta).cwiseQuotient(base.Psi.cwiseSqrt());
  const double omega = theta.squaredNorm() + lambda.squaredNorm() + min_sigma2;
  return pfr::make_partial_factor_model(base, theta, V, omega);
}

struct GaussianConditional {
  Vector mean_coefficients;  // conditional mean = coefficients' * given
  double variance;
};

/// Condition the last coordinate of a zero-mean Gaussian with covariance S on the others.
inline GaussianConditional condition_last(const Matrix& S) {
  const Index d = S.rows() - 1;
  const Matrix inv = dense_inverse(S.topLeftCorner(d, d));
  const Vector cross = S.col(d).head(d);
  return {inv * cross, S(d, d) - cross.dot(inv * cross)};
}

/// Conditional law of a block `target` given block `given` of N(0, S).
inline std::pair<Matrix, Matrix> condition_blocks(const Matrix& S, const std::vector<Index>& target,
                                                  const std::vector<Index>& given) {
  const Index a = static_cast<Index>(target.size());
  const Index b = static_cast<Index>(given.size());
  Matrix Saa(a, a), Sab(a, b), Sbb(b, b);
  for (Index i = 0; i < a; ++i) {
    for (Index j = 0; j < a; ++j) Saa(i, j) = S(target[i], target[j]);
    for (Index j = 0; j < b; ++j) Sab(i, j) = S(target[i], given[j]);
  }
  for (Index i = 0; i < b; ++i)
    for (Index j = 0; j < b; ++j) Sbb(i, j) = S(given[i], given[j]);
  const Matrix coef = Sab * dense_inverse(Sbb);
  return {coef, Saa - coef * Sab.transpose()};
}

/// Sum over rows of the Gaussian density, evaluated term by term with an explicit inverse.
inline double naive_log_likelihood(const Matrix& S, const Matrix& X) {
  const Matrix inv = dense_inverse(S);
  const double det = S.determinant();
  const double d = static_cast<double>(S.rows());
  double total = 0.0;
  for (Index i = 0; i < X.rows(); ++i) {
    const Vector x = X.row(i).transpose();
    const double density = std::exp(-0.5 * x.dot(inv * x)) / std::sqrt(std::pow(2.0 * std::numbers::pi, d) * det);
    total += std::log(density);
  }
  return total;
}

/// Generalized ridge posterior mean (X'X + P)^-1 (X'y + P m) by dense inversion.
inline Vector generalized_ridge(const Matrix& X, const Vector& y, const Matrix& P, const Vector& m) {
  return dense_inverse(X.transpose() * X + P) * (X.transpose() * y + P * m);
}

}  // namespace oracle
