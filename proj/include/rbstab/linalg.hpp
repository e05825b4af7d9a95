#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "rbstab/types.hpp"

namespace rbstab::linalg {

/// Modified Gram-Schmidt of `v` against the first `cols` columns of `basis`,
/// repeated `passes` times. Returns the norm of what is left.
template <typename BasisDerived, typename VecDerived>
typename VecDerived::Scalar orthogonalize_mgs(const Eigen::MatrixBase<BasisDerived>& basis,
                                              Index cols, Eigen::MatrixBase<VecDerived>& v,
                                              int passes = 2) {
  for (int pass = 0; pass < passes; ++pass) {
    for (Index j = 0; j < cols; ++j) {
      const auto coeff = basis.col(j).dot(v);
      v -= coeff * basis.col(j);
    }
  }
  return v.norm();
}

/// Largest absolute deviation of Q^T Q from the identity.
template <typename Derived>
typename Derived::Scalar orthonormality_error(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  if (q.cols() == 0) return Scalar(0);
  const MatrixX<Scalar> gram = q.transpose() * q;
  return (gram - MatrixX<Scalar>::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

/// 2-norm condition number. Symmetric input goes through the self-adjoint
/// eigenvalue route (singular values are |eigenvalues|), anything else
/// through a divide-and-conquer SVD.
template <typename Derived>
typename Derived::Scalar condition_number(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() == 0 || a.cols() == 0) return std::numeric_limits<Scalar>::quiet_NaN();
  Scalar smax, smin;
  const Scalar amax = a.cwiseAbs().maxCoeff();
  const bool symmetric =
      a.rows() == a.cols() && (a - a.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-12) * amax;
  if (symmetric) {
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(a, Eigen::EigenvaluesOnly);
    const auto abs_eigs = es.eigenvalues().cwiseAbs();
    smax = abs_eigs.maxCoeff();
    smin = abs_eigs.minCoeff();
  } else {
    Eigen::BDCSVD<MatrixX<Scalar>> svd(a);
    const auto& sv = svd.singularValues();
    smax = sv.maxCoeff();
    smin = sv.minCoeff();
  }
  if (smin == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return smax / smin;
}

/// Smallest and largest singular values of a general dense matrix.
template <typename Derived>
std::pair<typename Derived::Scalar, typename Derived::Scalar> singular_range(
    const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Eigen::BDCSVD<MatrixX<Scalar>> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return {Scalar(0), Scalar(0)};
  return {sv.minCoeff(), sv.maxCoeff()};
}

/// Discrete inf-sup constant of a dense bilinear form:
///   min_q max_w (q^T B w) / (|w|_X |q|_Q)
/// with B (rq x rx), X (rx x rx, SPD) and Q (rq x rq, SPD). With Cholesky
/// factors X = Lx Lx^T and Q = Lq Lq^T this is the smallest singular value of
/// Lq^{-1} B Lx^{-T}, and is zero whenever rq > rx.
template <typename BDerived, typename XDerived, typename QDerived>
typename BDerived::Scalar inf_sup_constant(const Eigen::MatrixBase<BDerived>& b,
                                           const Eigen::MatrixBase<XDerived>& x_gram,
                                           const Eigen::MatrixBase<QDerived>& q_gram) {
  using Scalar = typename BDerived::Scalar;
  using M = MatrixX<Scalar>;
  if (b.rows() == 0) return std::numeric_limits<Scalar>::quiet_NaN();
  if (b.cols() < b.rows()) return Scalar(0);
  const Eigen::LLT<M> x_llt(x_gram);
  if (x_llt.info() != Eigen::Success) throw NumericalError("inf_sup_constant: X Gram matrix not SPD");
  const Eigen::LLT<M> q_llt(q_gram);
  if (q_llt.info() != Eigen::Success) throw NumericalError("inf_sup_constant: Q Gram matrix not SPD");
  M c = q_llt.matrixL().solve(M(b));
  c = x_llt.matrixL().solve(M(c.transpose())).transpose();
  const Eigen::BDCSVD<M> svd(c);
  return svd.singularValues().minCoeff();
}

}  // namespace rbstab::linalg
