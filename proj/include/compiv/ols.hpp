#pragma once

#include "compiv/simplex.hpp"

namespace compiv {

/// Condition-number bound above which a design is treated as singular.
inline constexpr double kConditionLimit = 1e10;

/// Multivariate least squares T ≈ 1 interceptᵀ + Z coef.
struct OlsFit {
  Matrix coef;       ///< q×d
  Vector intercept;  ///< d

  Matrix predict(const Matrix& z) const;
};

/// Least squares with an intercept column, solved by column-pivoting QR.
/// Throws RankDeficientError naming the offending instrument columns when
/// the design [1, Z] has condition number above kConditionLimit.
OlsFit fit_ols(const Matrix& z, const Matrix& t);

/// Per-column F statistic of the fit against the intercept-only model:
/// ((RSS₀ - RSS₁)/q) / (RSS₁/(n - q - 1)).
Vector first_stage_f_stats(const Matrix& z, const Matrix& t);

/// Instrumental-variable estimate with intercepts on both sides:
/// (X̃ᵀP_Z X̃)⁻¹ X̃ᵀP_Z y where X̃ = [1, X] and P_Z projects onto [1, Z].
struct TwoStageFit {
  double intercept = 0.0;
  Vector coef;
  /// Largest over smallest singular value of the projected design P_Z X̃.
  double condition = 0.0;
};

/// Needs q >= d (UnderIdentifiedError otherwise) and a projected design
/// with condition number at most kConditionLimit (RankDeficientError).
TwoStageFit two_stage_least_squares(const Matrix& z, const Matrix& x, const Vector& y);

}  // namespace compiv
