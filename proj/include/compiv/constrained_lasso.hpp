#pragma once

#include "compiv/simplex.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace compiv {

enum class LossKind { kSquared, kHuber, kSquaredHinge, kHuberizedHinge };

/// Per-sample loss L(y, m) of the linear predictor m = β₀ + βᵀ log x.
///
/// squared:          (y - m)²
/// huber(δ):         ½ r² for |r| < δ, δ(|r| - δ/2) otherwise, r = y - m
/// squared hinge:    (1 - y m)² for y m <= 1, 0 otherwise
/// huberized hinge:  squared hinge for δ <= y m, (1-δ)(1+δ-2 y m) below δ
///
/// The hinge losses expect labels in {-1, +1}.
struct LossSpec {
  LossKind kind = LossKind::kSquared;
  double delta = 1.0;

  static LossSpec squared() { return {LossKind::kSquared, 1.0}; }
  static LossSpec huber(double delta);
  static LossSpec squared_hinge() { return {LossKind::kSquaredHinge, 1.0}; }
  static LossSpec huberized_hinge(double delta);

  bool is_classification() const noexcept {
    return kind == LossKind::kSquaredHinge || kind == LossKind::kHuberizedHinge;
  }
  double value(double y, double m) const;
  /// dL/dm.
  double derivative(double y, double m) const;
  /// Lipschitz constant of derivative() in m.
  double curvature_bound() const;
  std::string name() const;
};

/// Accepts squared, huber, squared_hinge and huberized_hinge, with - or _.
LossSpec parse_loss(const std::string& name, double delta = 1.0);

/// Log-contrast model: intercept + beta_logᵀ log(x) with Σ beta_log = 0.
struct LinearFit {
  Vector beta_log;
  double intercept = 0.0;

  double predict_log(const Eigen::Ref<const Vector>& log_x) const { return intercept + beta_log.dot(log_x); }
};

struct SolverOptions {
  double tolerance = 1e-9;  ///< relative objective change
  int max_iterations = 10000;
  /// Re-solve the squared-loss problem exactly on the detected support with
  /// signs fixed, keeping the result only if it lowers the objective.
  bool polish = true;
  /// Record the objective after every iteration in SolverDiagnostics.
  bool record_trace = false;
};

struct SolverDiagnostics {
  int iterations = 0;
  bool converged = false;
  bool polished = false;
  double objective = 0.0;
  std::vector<double> objective_trace;
};

/// Sum of losses plus λ‖β‖₁, evaluated on the original (uncentered) design.
double lasso_objective(const Matrix& x_log, const Vector& y, const LossSpec& loss, double lambda,
                       const LinearFit& fit);

/// Smallest λ whose solution has β = 0, from the constrained KKT conditions
/// at the optimal intercept-only model: (max_j g_j - min_j g_j) / 2.
double lambda_max(const Matrix& x_log, const Vector& y, const LossSpec& loss);

/// Minimizes Σ L(y_i, β₀ + x_iᵀβ) + λ‖β‖₁ subject to Σβ = 0, with β₀
/// unpenalized. Solved by monotone accelerated proximal gradient on the
/// centered design; the proximal map of the ℓ₁ norm on the sum-zero
/// hyperplane is soft-thresholding after a scalar shift found exactly from
/// its piecewise-linear sum.
LinearFit fit_constrained_lasso(const Matrix& x_log, const Vector& y, const LossSpec& loss, double lambda,
                                const SolverOptions& options = {}, SolverDiagnostics* diagnostics = nullptr,
                                const LinearFit* warm_start = nullptr);

struct RegularizationPath {
  std::vector<double> lambdas;  ///< descending
  Matrix coefs;                 ///< n_lambda × p, rows sum to zero
  Vector intercepts;
  std::vector<bool> converged;

  LinearFit fit_at(std::size_t k) const { return {coefs.row(static_cast<Eigen::Index>(k)).transpose(), intercepts[static_cast<Eigen::Index>(k)]}; }
};

inline constexpr int kDefaultPathLength = 50;
inline constexpr double kDefaultLambdaMinRatio = 1e-3;

/// Log-spaced grid from λ_max down to ratio·λ_max.
std::vector<double> default_lambda_grid(double lambda_max, int length = kDefaultPathLength,
                                        double min_ratio = kDefaultLambdaMinRatio);

/// Warm-started fits along a descending grid. Without an explicit grid the
/// default 50-point grid from lambda_max() is used.
RegularizationPath fit_path(const Matrix& x_log, const Vector& y, const LossSpec& loss,
                            std::optional<std::vector<double>> lambdas = std::nullopt,
                            const SolverOptions& options = {});

inline constexpr double kDefaultStabilityThreshold = 0.7;
inline constexpr double kRealDataStabilityThreshold = 0.65;

struct StabilityOptions {
  double threshold = kDefaultStabilityThreshold;
  int n_resamples = 50;
  int path_length = kDefaultPathLength;
  double lambda_min_ratio = kDefaultLambdaMinRatio;
  /// Bound q on the average selected-set size; the λ region stops before
  /// the first grid point where the mean support across resamples exceeds it.
  int max_average_support = 10;
  std::uint64_t seed = 0;
};

struct StabilityProfile {
  Vector selection_freq;
  double threshold = kDefaultStabilityThreshold;
  int n_resamples = 0;
  std::vector<int> selected;
  /// Number of relative-λ grid points inside the selection region.
  int region_length = 0;
};

struct StabilityResult {
  StabilityProfile profile;
  LinearFit fit;  ///< unpenalized constrained refit on the selected parts
  bool empty_selection = false;
};

/// Stability selection over subsamples of size ⌊n/2⌋ drawn without
/// replacement. Each subsample fits a path on a relative grid
/// λ_max(subsample)·r_k; a part's frequency is the maximum over the region
/// of the fraction of subsamples with a non-zero coefficient. Fewer than two
/// selected parts leave no sum-zero contrast, so the refit is intercept-only
/// and flagged.
StabilityResult stability_select(const Matrix& x_log, const Vector& y, const LossSpec& loss,
                                 const StabilityOptions& options = {});

/// Unpenalized constrained fit using only the given columns; other
/// coefficients are exactly zero.
LinearFit refit_on_support(const Matrix& x_log, const Vector& y, const LossSpec& loss,
                           const std::vector<int>& support);

}  // namespace compiv
