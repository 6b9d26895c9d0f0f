#include "compiv/ols.hpp"

#include "compiv/error.hpp"

#include <cmath>
#include <string>

namespace compiv {

namespace {

Matrix with_intercept(const Matrix& z) {
  Matrix d(z.rows(), z.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(z.cols()) = z;
  return d;
}

std::string column_name(Eigen::Index k, const char* prefix) {
  return k == 0 ? std::string("intercept") : std::string(prefix) + std::to_string(k);
}

double condition_of_r(const Matrix& r) {
  const Eigen::JacobiSVD<Matrix> svd(r);
  const Vector s = svd.singularValues();
  if (s.size() == 0) return 0.0;
  const double smallest = s[s.size() - 1];
  return smallest > 0.0 ? s[0] / smallest : INFINITY;
}

// Column-pivoting QR with a conditioning check. Names the trailing pivot
// columns that push the condition number over the limit.
Eigen::ColPivHouseholderQR<Matrix> checked_qr(const Matrix& design, const char* prefix, double* condition) {
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  const Eigen::Index k = design.cols();
  const Matrix r = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  const double cond = condition_of_r(r);
  if (condition) *condition = cond;
  if (!(cond <= kConditionLimit)) {
    const double top = std::abs(r(0, 0));
    std::string names;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (std::abs(r(j, j)) * kConditionLimit <= top || j >= qr.rank()) {
        if (!names.empty()) names += ", ";
        names += column_name(qr.colsPermutation().indices()[j], prefix);
      }
    }
    if (names.empty()) names = column_name(qr.colsPermutation().indices()[k - 1], prefix);
    throw RankDeficientError("design is rank deficient (condition number " + std::to_string(cond) +
                             "); offending columns: " + names);
  }
  return qr;
}

}  // namespace

Matrix OlsFit::predict(const Matrix& z) const {
  if (z.cols() != coef.rows()) {
    throw DimensionError("expected " + std::to_string(coef.rows()) + " instrument columns, got " +
                         std::to_string(z.cols()));
  }
  return (z * coef).rowwise() + intercept.transpose();
}

OlsFit fit_ols(const Matrix& z, const Matrix& t) {
  const Eigen::Index n = z.rows();
  const Eigen::Index q = z.cols();
  if (t.rows() != n) throw DimensionError("instrument and target row counts differ");
  if (q < 1) throw DimensionError("need at least one instrument column");
  if (n <= q + 1) throw DegenerateInputError("OLS needs n > q + 1");
  if (!z.allFinite() || !t.allFinite()) throw DomainError("OLS inputs contain non-finite values");
  const Matrix design = with_intercept(z);
  const auto qr = checked_qr(design, "z_", nullptr);
  const Matrix b = qr.solve(t);
  return {b.bottomRows(q), b.row(0).transpose()};
}

Vector first_stage_f_stats(const Matrix& z, const Matrix& t) {
  const OlsFit fit = fit_ols(z, t);
  const Eigen::Index n = z.rows();
  const Eigen::Index q = z.cols();
  const Matrix resid = t - fit.predict(z);
  Vector f(t.cols());
  for (Eigen::Index d = 0; d < t.cols(); ++d) {
    const double rss1 = resid.col(d).squaredNorm();
    const double rss0 = (t.col(d).array() - t.col(d).mean()).square().sum();
    f[d] = ((rss0 - rss1) / static_cast<double>(q)) / (rss1 / static_cast<double>(n - q - 1));
  }
  return f;
}

TwoStageFit two_stage_least_squares(const Matrix& z, const Matrix& x, const Vector& y) {
  const Eigen::Index n = z.rows();
  const Eigen::Index q = z.cols();
  const Eigen::Index d = x.cols();
  if (x.rows() != n || y.size() != n) throw DimensionError("instrument, treatment and outcome lengths differ");
  if (q < d) {
    throw UnderIdentifiedError("under-identified: " + std::to_string(q) + " instruments for " + std::to_string(d) +
                               " treatment dimensions");
  }
  if (!y.allFinite()) throw DomainError("outcome contains non-finite values");
  // Stage 1 on every treatment column; the intercept column is reproduced
  // exactly by the projection.
  const OlsFit stage1 = fit_ols(z, x);
  const Matrix projected = with_intercept(stage1.predict(z));
  TwoStageFit fit;
  const auto qr = checked_qr(projected, "x_", &fit.condition);
  const Vector b = qr.solve(y);
  fit.intercept = b[0];
  fit.coef = b.tail(d);
  return fit;
}

}  // namespace compiv
