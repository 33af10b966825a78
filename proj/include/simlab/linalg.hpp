#pragma once

#include <Eigen/Cholesky>

namespace simlab {

// True when an LDLT factorization describes a numerically positive-definite
// matrix: every pivot above `tol` times the largest and the reciprocal
// condition estimate at least `tol`. The pivot test is needed because
// LDLT::rcond() is unreliable once a pivot is exactly zero.
template <typename MatrixType>
bool positive_definite(const Eigen::LDLT<MatrixType>& ldlt, typename MatrixType::RealScalar tol) {
  using Real = typename MatrixType::RealScalar;
  if (ldlt.info() != Eigen::Success) return false;
  const auto d = ldlt.vectorD();
  const Real hi = d.maxCoeff();
  return hi > Real(0) && d.minCoeff() > tol * hi && ldlt.rcond() >= tol;
}

}  // namespace simlab
