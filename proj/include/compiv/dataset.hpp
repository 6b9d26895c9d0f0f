#pragma once

#include "compiv/simplex.hpp"

namespace compiv {

/// Aligned instruments (n×q), compositions (n×p, one per row) and
/// outcomes (n).
struct IVDataset {
  Matrix z;
  Matrix x;
  Vector y;
  /// Set when zero replacement was applied while building x.
  bool pseudo_counted = false;

  Eigen::Index n() const noexcept { return x.rows(); }
  Eigen::Index p() const noexcept { return x.cols(); }
  Eigen::Index q() const noexcept { return z.cols(); }

  /// Checks aligned lengths, finite values and strictly positive closed rows.
  void validate() const;

  /// Builds compositions from raw counts: rows are closed after adding
  /// `pc` to every entry when any zero is present in the batch.
  static IVDataset from_counts(Matrix z, const Matrix& counts, Vector y, double pc = kDefaultPseudoCount);
};

/// Closes count rows, adding `pc` to the whole batch first if any entry is
/// zero. Sets `applied` accordingly.
Matrix close_counts(const Matrix& counts, double pc, bool* applied = nullptr);

}  // namespace compiv
