#pragma once

#include "compiv/simplex.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace compiv {

/// exp(-‖a - b‖² / (2σ²)) between the rows of a and b.
Matrix gaussian_kernel(const Matrix& a, const Matrix& b, double sigma);

/// Median pairwise Euclidean distance between rows (at most `max_rows`
/// rows are used, taken from the top). Falls back to 1 when all rows
/// coincide.
double median_heuristic(const Matrix& rows, Eigen::Index max_rows = 1000);

/// 10-point log grid from 1e-6 to 1.
std::vector<double> default_ridge_grid();

struct KivOptions {
  double stage1_fraction = 0.5;
  std::uint64_t split_seed = 0;
  std::vector<double> lambda_grid = default_ridge_grid();
  std::vector<double> xi_grid = default_ridge_grid();
  /// Fixed ridge parameters skip the grid search.
  std::optional<double> lambda;
  std::optional<double> xi;
  /// Larger datasets are randomly subsampled to this size before the split.
  Eigen::Index max_samples = 2000;
};

/// Kernel instrumental-variable fit in dual form:
///   W = K_XX (K_ZZ + nλI)⁻¹ K_ZZ̃
///   α̂ = (W Wᵀ + mξ K_XX)⁻¹ W (ỹ - ȳ)
///   f̂(x) = ȳ + α̂ᵀ K_Xx
/// with n stage-1 and m stage-2 samples; ȳ is the stage-2 outcome mean.
struct KernelFit {
  Matrix x_train;  ///< stage-1 treatment coordinates
  Matrix z_train;  ///< stage-1 instruments
  Vector weights;  ///< α̂
  double y_offset = 0.0;
  double sigma_x = 1.0;
  double sigma_z = 1.0;
  double lambda = 0.0;
  double xi = 0.0;
  Eigen::Index n_stage1 = 0;
  Eigen::Index n_stage2 = 0;
  std::uint64_t split_seed = 0;
  bool subsampled = false;

  double predict(const Vector& x) const;
  Vector predict_rows(const Matrix& x) const;
};

/// Bandwidths come from the median heuristic on the stage-1 rows. Without
/// fixed values, λ minimizes the stage-1 error of the conditional mean
/// embedding on the stage-2 pairs (z̃, x̃) and ξ minimizes the stage-2 error
/// on the stage-1 outcomes.
KernelFit fit_kiv(const Matrix& z, const Matrix& x, const Vector& y, const KivOptions& options = {});

}  // namespace compiv
