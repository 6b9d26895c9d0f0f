#include "compiv/logratio.hpp"

#include "compiv/error.hpp"

#include <cmath>
#include <string>

namespace compiv {

namespace {

constexpr double kBasisTolerance = 1e-10;
constexpr double kSumZeroTolerance = 1e-8;

Vector positive_log(const Composition& x, const char* what) {
  if (!x.strictly_positive()) {
    throw DomainError(std::string(what) + ": composition has zero parts");
  }
  return x.parts().array().log().matrix();
}

void require_basis_size(Eigen::Index p, const LogRatioBasis& basis) {
  if (p != basis.parts()) {
    throw DimensionError("basis built for " + std::to_string(basis.parts()) + " parts, got " + std::to_string(p));
  }
}

// exp then close, shifting by the max first so large coordinates do not overflow.
Vector stable_softmax(const Vector& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Matrix stable_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    out.row(i) = stable_softmax(logits.row(i).transpose()).transpose();
  }
  return out;
}

}  // namespace

LogRatioBasis::LogRatioBasis(Matrix v) : v_(std::move(v)) {
  if (v_.rows() < 2 || v_.cols() != v_.rows() - 1) {
    throw DimensionError("log-ratio basis must be p×(p-1) with p >= 2");
  }
  const Matrix gram = v_.transpose() * v_;
  if ((gram - Matrix::Identity(v_.cols(), v_.cols())).cwiseAbs().maxCoeff() > kBasisTolerance) {
    throw DomainError("log-ratio basis is not orthonormal");
  }
  if (v_.colwise().sum().cwiseAbs().maxCoeff() > kBasisTolerance) {
    throw DomainError("log-ratio basis columns must sum to zero");
  }
}

LogRatioBasis helmert_basis(Eigen::Index p) {
  if (p < 2) {
    throw DimensionError("helmert basis needs p >= 2");
  }
  Matrix v = Matrix::Zero(p, p - 1);
  for (Eigen::Index k = 0; k < p - 1; ++k) {
    const double m = static_cast<double>(k + 1);
    const double norm = std::sqrt(m * (m + 1.0));
    v.col(k).head(k + 1).setConstant(1.0 / norm);
    v(k + 1, k) = -m / norm;
  }
  return LogRatioBasis(std::move(v));
}

Vector alr(const Composition& x) {
  const Vector l = positive_log(x, "alr");
  const Eigen::Index p = l.size();
  return (l.head(p - 1).array() - l[p - 1]).matrix();
}

Composition alr_inv(const Vector& t) {
  Vector logits(t.size() + 1);
  logits << t, 0.0;
  return closure(stable_softmax(logits));
}

Vector clr(const Composition& x) {
  const Vector l = positive_log(x, "clr");
  return (l.array() - l.mean()).matrix();
}

Composition clr_inv(const Vector& t) { return closure(stable_softmax(t)); }

Vector ilr(const Composition& x, const LogRatioBasis& basis) {
  require_basis_size(x.size(), basis);
  return basis.matrix().transpose() * clr(x);
}

Composition ilr_inv(const Vector& t, const LogRatioBasis& basis) {
  if (t.size() != basis.dim()) {
    throw DimensionError("ilr coordinates of length " + std::to_string(t.size()) + " for a basis of dimension " +
                         std::to_string(basis.dim()));
  }
  return closure(stable_softmax(basis.matrix() * t));
}

Vector beta_log_to_ilr(const Vector& beta_log, const LogRatioBasis& basis) {
  require_basis_size(beta_log.size(), basis);
  if (std::abs(beta_log.sum()) > kSumZeroTolerance) {
    throw DomainError("log-contrast coefficients must sum to zero (sum = " + std::to_string(beta_log.sum()) + ")");
  }
  return basis.matrix().transpose() * beta_log;
}

Vector beta_ilr_to_log(const Vector& beta_ilr, const LogRatioBasis& basis) {
  if (beta_ilr.size() != basis.dim()) {
    throw DimensionError("ilr coefficient length does not match basis");
  }
  return basis.matrix() * beta_ilr;
}

Matrix alr_rows(const Matrix& x) {
  const Matrix l = log_rows(x);
  const Eigen::Index p = l.cols();
  return l.leftCols(p - 1).colwise() - l.col(p - 1);
}

Matrix alr_inv_rows(const Matrix& t) {
  Matrix logits(t.rows(), t.cols() + 1);
  logits << t, Vector::Zero(t.rows());
  return stable_softmax_rows(logits);
}

Matrix clr_rows(const Matrix& x) {
  const Matrix l = log_rows(x);
  return l.colwise() - l.rowwise().mean();
}

Matrix ilr_rows(const Matrix& x, const LogRatioBasis& basis) {
  require_basis_size(x.cols(), basis);
  return clr_rows(x) * basis.matrix();
}

Matrix ilr_inv_rows(const Matrix& t, const LogRatioBasis& basis) {
  if (t.cols() != basis.dim()) {
    throw DimensionError("ilr coordinate batch does not match basis dimension");
  }
  return stable_softmax_rows(t * basis.matrix().transpose());
}

}  // namespace compiv
