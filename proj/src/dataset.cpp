#include "compiv/dataset.hpp"

#include "compiv/error.hpp"

#include <string>

namespace compiv {

void IVDataset::validate() const {
  if (z.rows() != x.rows() || y.size() != x.rows()) {
    throw DimensionError("dataset has " + std::to_string(z.rows()) + " instrument rows, " + std::to_string(x.rows()) +
                         " composition rows and " + std::to_string(y.size()) + " outcomes");
  }
  if (x.rows() < 2) throw DegenerateInputError("dataset needs at least two samples");
  if (z.cols() < 1) throw DimensionError("dataset needs at least one instrument");
  if (!z.allFinite()) throw DomainError("instruments contain non-finite values");
  if (!y.allFinite()) throw DomainError("outcomes contain non-finite values");
  require_positive_compositions(x);
}

Matrix close_counts(const Matrix& counts, double pc, bool* applied) {
  if (!(pc > 0.0)) throw DomainError("pseudo-count must be positive");
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
      if (!std::isfinite(counts(i, j)) || counts(i, j) < 0.0) {
        throw DomainError("count row " + std::to_string(i) + " has a negative or non-finite entry");
      }
    }
    if (counts.row(i).sum() <= 0.0) throw DegenerateInputError("count row " + std::to_string(i) + " is all zero");
  }
  const bool any_zero = (counts.array() == 0.0).any();
  if (applied) *applied = any_zero;
  if (!any_zero) return close_rows(counts);
  return close_rows((counts.array() + pc).matrix());
}

IVDataset IVDataset::from_counts(Matrix z, const Matrix& counts, Vector y, double pc) {
  IVDataset ds;
  ds.z = std::move(z);
  ds.x = close_counts(counts, pc, &ds.pseudo_counted);
  ds.y = std::move(y);
  ds.validate();
  return ds;
}

}  // namespace compiv
