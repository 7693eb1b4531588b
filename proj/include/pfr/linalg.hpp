// Dense linear-algebra helpers shared across modules.
#pragma once

#include "pfr/types.hpp"

#include <cmath>

namespace pfr {

/// Positive-definiteness by attempted LDLT; pivots must satisfy
/// min > rel_tol * max. Non-symmetric input is rejected.
template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& A, double rel_tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (A.rows() != A.cols() || A.rows() == 0) return false;
  const MatrixX<Scalar> M = A;
  const Scalar scale = M.cwiseAbs().maxCoeff();
  if (!((M - M.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-10) * std::max(scale, Scalar(1)))) return false;
  Eigen::LDLT<MatrixX<Scalar>> ldlt(M);
  if (ldlt.info() != Eigen::Success) return false;
  const VectorX<Scalar> d = ldlt.vectorD();
  const Scalar largest = d.maxCoeff();
  const Scalar smallest = d.minCoeff();
  return largest > Scalar(0) && smallest > Scalar(rel_tol) * largest;
}

template <typename Derived>
bool is_positive_semidefinite(const Eigen::MatrixBase<Derived>& A, double rel_tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> M = A;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(M, Eigen::EigenvaluesOnly);
  const VectorX<Scalar> ev = es.eigenvalues();
  const Scalar scale = std::max(ev.cwiseAbs().maxCoeff(), Scalar(1));
  return ev.minCoeff() >= -Scalar(rel_tol) * scale;
}

/// Number of singular values above rel_tol * largest.
template <typename Derived>
Index numerical_rank(const Eigen::MatrixBase<Derived>& A, double rel_tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  if (A.size() == 0) return 0;
  Eigen::BDCSVD<MatrixX<Scalar>> svd(A);
  const VectorX<Scalar> s = svd.singularValues();
  if (s.size() == 0 || s(0) == Scalar(0)) return 0;
  return (s.array() > Scalar(rel_tol) * s(0)).count();
}

/// Moore-Penrose pseudo-inverse; singular values below rel_tol * max are zeroed.
template <typename Derived>
MatrixX<typename Derived::Scalar> pseudo_inverse(const Eigen::MatrixBase<Derived>& A, double rel_tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  Eigen::BDCSVD<MatrixX<Scalar>> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorX<Scalar> s = svd.singularValues();
  VectorX<Scalar> inv = VectorX<Scalar>::Zero(s.size());
  const Scalar cutoff = s.size() > 0 ? Scalar(rel_tol) * s(0) : Scalar(0);
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) inv(i) = Scalar(1) / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/**
 * Solves against a factor-form covariance BB' + diag(Psi) with the
 * Woodbury identity, so that p×p matrices are never formed:
 *
 *   (BB' + Psi)^-1 = Psi^-1 - Psi^-1 B (I + B' Psi^-1 B)^-1 B' Psi^-1
 */
template <typename Scalar>
class FactorCovarianceSolver {
 public:
  FactorCovarianceSolver(const MatrixX<Scalar>& B, const VectorX<Scalar>& Psi)
      : B_(B), psi_inv_(Psi.cwiseInverse()), log_det_psi_(Psi.array().log().sum()) {
    const Index k = B.cols();
    MatrixX<Scalar> capacitance = MatrixX<Scalar>::Identity(k, k);
    capacitance.noalias() += B.transpose() * psi_inv_.asDiagonal() * B;
    core_.compute(capacitance);
  }

  template <typename Rhs>
  MatrixX<Scalar> solve(const Eigen::MatrixBase<Rhs>& rhs) const {
    const MatrixX<Scalar> scaled = psi_inv_.asDiagonal() * rhs;
    if (B_.cols() == 0) return scaled;
    const MatrixX<Scalar> inner = core_.solve(B_.transpose() * scaled);
    return scaled - psi_inv_.asDiagonal() * (B_ * inner);
  }

  /// log det(BB' + Psi) = log det(Psi) + log det(I + B' Psi^-1 B).
  Scalar log_determinant() const {
    Scalar ld = log_det_psi_;
    if (B_.cols() > 0) {
      const MatrixX<Scalar> L = core_.matrixL();
      ld += Scalar(2) * L.diagonal().array().log().sum();
    }
    return ld;
  }

 private:
  MatrixX<Scalar> B_;
  VectorX<Scalar> psi_inv_;
  Scalar log_det_psi_;
  Eigen::LLT<MatrixX<Scalar>> core_;
};

}  // namespace pfr
