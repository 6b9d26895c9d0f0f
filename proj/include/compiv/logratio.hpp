#pragma once

#include "compiv/simplex.hpp"

namespace compiv {

/// Orthonormal basis of the clr hyperplane: a p×(p-1) matrix V with
/// VᵀV = I and zero column sums. Any such basis defines an ilr transform.
class LogRatioBasis {
 public:
  /// Validates orthonormality and the contrast property (1e-10).
  explicit LogRatioBasis(Matrix v);

  const Matrix& matrix() const noexcept { return v_; }
  Eigen::Index parts() const noexcept { return v_.rows(); }
  Eigen::Index dim() const noexcept { return v_.cols(); }

 private:
  Matrix v_;
};

/// Helmert contrasts with the first row removed, row-normalized and
/// transposed: column k (0-based) is (1,…,1,-(k+1),0,…,0)/sqrt((k+1)(k+2)).
LogRatioBasis helmert_basis(Eigen::Index p);

/// log(x_j / x_p) for j < p. The reference part is always the last one;
/// permute parts beforehand to use another reference.
Vector alr(const Composition& x);
Composition alr_inv(const Vector& t);

Vector clr(const Composition& x);
Composition clr_inv(const Vector& t);

Vector ilr(const Composition& x, const LogRatioBasis& basis);
Composition ilr_inv(const Vector& t, const LogRatioBasis& basis);

/// Vᵀ β_log: the ilr-coordinate coefficients of a log-contrast, so that
/// β_logᵀ log(x) = (Vᵀβ_log)ᵀ ilr(x) for every positive x.
Vector beta_log_to_ilr(const Vector& beta_log, const LogRatioBasis& basis);

/// V β_ilr: inverse of beta_log_to_ilr; the result sums to zero.
Vector beta_ilr_to_log(const Vector& beta_ilr, const LogRatioBasis& basis);

// Batch versions; rows are compositions or coordinate vectors.
Matrix alr_rows(const Matrix& x);
Matrix alr_inv_rows(const Matrix& t);
Matrix clr_rows(const Matrix& x);
Matrix ilr_rows(const Matrix& x, const LogRatioBasis& basis);
Matrix ilr_inv_rows(const Matrix& t, const LogRatioBasis& basis);

}  // namespace compiv
