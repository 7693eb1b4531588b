// Probabilistic algebra of the factor and partial factor models.
//
// Marginal predictor law:   X = B f + nu,  f ~ N(0, I_k),  nu ~ N(0, Psi)
// Joint law of (X, Y):      cov = [ BB' + Psi   V' ]
//                                 [ V           omega ]
//
// V is free; the pure factor regression is the special case V = theta B'.
// Psi is always stored as the vector of its diagonal.
#pragma once

#include "pfr/linalg.hpp"
#include "pfr/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <type_traits>

namespace pfr {

template <typename Scalar>
struct FactorModel {
  MatrixX<Scalar> B;    // p x k loadings
  VectorX<Scalar> Psi;  // idiosyncratic variances

  Index p() const { return B.rows(); }
  Index k() const { return B.cols(); }
};

template <typename Scalar>
struct PartialFactorModel {
  FactorModel<Scalar> base;
  VectorX<Scalar> theta;  // factor-regression coefficients (row vector in the model, k entries)
  VectorX<Scalar> V;      // cov(Y, X), p entries
  Scalar sigma2;          // var(Y | f, X)
  Scalar omega;           // var(Y)

  Index p() const { return base.p(); }
  Index k() const { return base.k(); }
};

template <typename Scalar>
struct ConditionalMoments {
  Scalar mean;
  Scalar variance;
};

template <typename Scalar>
void validate(const FactorModel<Scalar>& m) {
  if (m.Psi.size() != m.B.rows()) throw std::invalid_argument("FactorModel: Psi length must equal rows of B");
  if (m.B.cols() > m.B.rows()) throw std::invalid_argument("FactorModel: k must not exceed p");
  if ((m.Psi.array() <= Scalar(0)).any()) throw std::domain_error("FactorModel: idiosyncratic variances must be positive");
}

template <typename DerivedB, typename DerivedPsi>
MatrixX<typename DerivedB::Scalar> marginal_covariance(const Eigen::MatrixBase<DerivedB>& B,
                                                       const Eigen::MatrixBase<DerivedPsi>& Psi) {
  using Scalar = typename DerivedB::Scalar;
  if (Psi.size() != B.rows()) throw std::invalid_argument("marginal_covariance: Psi length must equal rows of B");
  if ((Psi.array() <= Scalar(0)).any()) throw std::domain_error("marginal_covariance: Psi must be strictly positive");
  MatrixX<Scalar> S = B * B.transpose();
  S.diagonal() += Psi;
  return S;
}

template <typename Scalar>
MatrixX<Scalar> marginal_covariance(const FactorModel<Scalar>& m) {
  return marginal_covariance(m.B, m.Psi);
}

/// (V - theta B') Psi^{-1/2}: the part of cov(Y, X) not routed through the factors,
/// on the standardized residual scale.
template <typename Scalar>
VectorX<Scalar> residual_loading(const PartialFactorModel<Scalar>& m) {
  const VectorX<Scalar> deviation = m.V - m.base.B * m.theta;
  return deviation.cwiseQuotient(m.base.Psi.cwiseSqrt());
}

/**
 * var(Y | f, X) = omega - [V theta] Sigma_{X,f}^{-1} [V theta]'.
 *
 * Sigma_{X,f} is the (p+k)-square (X, f) block of the full covariance. Its
 * inverse is the precision [Psi^-1, -Psi^-1 B; -B'Psi^-1, I + B'Psi^-1 B],
 * which reduces the quadratic form to theta theta' + Lambda Lambda'.
 */
template <typename Scalar>
Scalar residual_variance(const FactorModel<Scalar>& base, const VectorX<Scalar>& theta, const VectorX<Scalar>& V,
                         Scalar omega) {
  const VectorX<Scalar> lambda = (V - base.B * theta).cwiseQuotient(base.Psi.cwiseSqrt());
  return omega - theta.squaredNorm() - lambda.squaredNorm();
}

/// Assemble a partial factor model from (B, Psi, theta, V, omega); sigma2 is derived.
template <typename Scalar>
PartialFactorModel<Scalar> make_partial_factor_model(FactorModel<Scalar> base, std::type_identity_t<VectorX<Scalar>> theta,
                                                     std::type_identity_t<VectorX<Scalar>> V,
                                                     std::type_identity_t<Scalar> omega) {
  validate(base);
  if (theta.size() != base.k()) throw std::invalid_argument("partial factor model: theta must have k entries");
  if (V.size() != base.p()) throw std::invalid_argument("partial factor model: V must have p entries");
  const Scalar sigma2 = residual_variance(base, theta, V, omega);
  if (!(sigma2 > Scalar(0))) {
    throw ModelInconsistencyError("partial factor model: implied conditional variance is not positive");
  }
  return PartialFactorModel<Scalar>{std::move(base), std::move(theta), std::move(V), sigma2, omega};
}

/// Pure factor regression: V = theta B', omega = sigma2 + theta theta'.
template <typename Scalar>
PartialFactorModel<Scalar> make_factor_regression(FactorModel<Scalar> base, std::type_identity_t<VectorX<Scalar>> theta,
                                                  std::type_identity_t<Scalar> sigma2) {
  validate(base);
  if (!(sigma2 > Scalar(0))) throw std::domain_error("factor regression: sigma2 must be positive");
  VectorX<Scalar> V = base.B * theta;
  const Scalar omega = sigma2 + theta.squaredNorm();
  return PartialFactorModel<Scalar>{std::move(base), std::move(theta), std::move(V), sigma2, omega};
}

/// The (p+1)-square covariance of (X, Y).
template <typename Scalar>
MatrixX<Scalar> joint_covariance(const PartialFactorModel<Scalar>& m) {
  const Index p = m.p();
  MatrixX<Scalar> S(p + 1, p + 1);
  S.topLeftCorner(p, p) = marginal_covariance(m.base);
  S.topRightCorner(p, 1) = m.V;
  S.bottomLeftCorner(1, p) = m.V.transpose();
  S(p, p) = m.omega;
  return S;
}

/// The (p+k+1)-square covariance of (X, f, Y), in that block order.
template <typename Scalar>
MatrixX<Scalar> full_covariance(const PartialFactorModel<Scalar>& m) {
  const Index p = m.p();
  const Index k = m.k();
  MatrixX<Scalar> S = MatrixX<Scalar>::Zero(p + k + 1, p + k + 1);
  S.block(0, 0, p, p) = marginal_covariance(m.base);
  S.block(0, p, p, k) = m.base.B;
  S.block(p, 0, k, p) = m.base.B.transpose();
  S.block(p, p, k, k).setIdentity();
  S.block(0, p + k, p, 1) = m.V;
  S.block(p + k, 0, 1, p) = m.V.transpose();
  S.block(p, p + k, k, 1) = m.theta;
  S.block(p + k, p, 1, k) = m.theta.transpose();
  S(p + k, p + k) = m.omega;
  if (!is_positive_semidefinite(S)) {
    throw ModelInconsistencyError("full_covariance: (X, f, Y) covariance is not positive semi-definite");
  }
  return S;
}

/// Moments of Y given (f, x):
///   mean     = theta f + (V - theta B') Psi^{-1} (x - B f)
///   variance = sigma2
template <typename Scalar, typename DerivedF, typename DerivedX>
ConditionalMoments<Scalar> conditional_moments(const PartialFactorModel<Scalar>& m, const Eigen::MatrixBase<DerivedF>& f,
                                               const Eigen::MatrixBase<DerivedX>& x) {
  if (f.size() != m.k() || x.size() != m.p()) throw std::invalid_argument("conditional_moments: dimension mismatch");
  const VectorX<Scalar> standardized = (x - m.base.B * f).cwiseQuotient(m.base.Psi.cwiseSqrt());
  const Scalar mean = m.theta.dot(f) + residual_loading(m).dot(standardized);
  return {mean, m.sigma2};
}

/// beta = V Sigma_X^{-1}, evaluated through the factor form.
template <typename Scalar>
VectorX<Scalar> implied_beta(const PartialFactorModel<Scalar>& m) {
  FactorCovarianceSolver<Scalar> solver(m.base.B, m.base.Psi);
  return solver.solve(m.V);
}

/**
 * Zero-mean Gaussian log-likelihood of the rows of X under covariance Sigma.
 */
template <typename DerivedS, typename DerivedX>
typename DerivedS::Scalar log_likelihood(const Eigen::MatrixBase<DerivedS>& Sigma, const Eigen::MatrixBase<DerivedX>& X) {
  using Scalar = typename DerivedS::Scalar;
  if (Sigma.rows() != X.cols()) throw std::invalid_argument("log_likelihood: dimension mismatch");
  if (!is_positive_definite(Sigma)) throw std::domain_error("log_likelihood: covariance is not positive definite");
  const MatrixX<Scalar> S = Sigma;
  Eigen::LLT<MatrixX<Scalar>> llt(S);
  const Index n = X.rows();
  const Index d = X.cols();
  const Scalar log_det = Scalar(2) * MatrixX<Scalar>(llt.matrixL()).diagonal().array().log().sum();
  const MatrixX<Scalar> W = llt.matrixL().solve(X.transpose());
  const Scalar quad = W.squaredNorm();
  const Scalar log_2pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  return Scalar(-0.5) * (Scalar(n * d) * log_2pi + Scalar(n) * log_det + quad);
}

/// n i.i.d. draws of (X, Y) from the joint law. All rows are labeled; no centering is applied.
DataMatrix sample_joint(const PartialFactorModel<double>& m, Index n, std::uint64_t seed);

}  // namespace pfr
