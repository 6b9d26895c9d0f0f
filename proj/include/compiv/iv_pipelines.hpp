#pragma once

#include "compiv/constrained_lasso.hpp"
#include "compiv/dataset.hpp"
#include "compiv/dirichlet.hpp"
#include "compiv/kiv.hpp"
#include "compiv/logratio.hpp"
#include "compiv/ols.hpp"

#include <optional>
#include <string>
#include <vector>

namespace compiv {

enum class Method { kTwoStage, kTwoStageIlr, kIlrLc, kAlrLc, kDirLc, kKivIlr, kOnlyLc, kDiversity2sls, kDiversityKiv };

/// CLI names: 2sls, 2sls-ilr, ilr-lc, alr-lc, dir-lc, kiv-ilr, only-lc,
/// diversity-2sls, diversity-kiv.
std::string to_string(Method method);
Method parse_method(const std::string& name);
/// Table labels: 2SLS, 2SLS_ILR, ILR+LC, ALR+LC, DIR+LC, KIV_ILR, OnlyLC, ...
std::string display_name(Method method);
/// The seven compositional methods in table order.
const std::vector<Method>& compositional_methods();

struct PipelineOptions {
  /// Stage-2 loss; the hinge losses turn the log-contrast methods into
  /// classifiers on labels in {-1, +1}.
  LossSpec loss = LossSpec::squared();
  StabilityOptions stability;
  DirichletOptions dirichlet;
  KivOptions kiv;
};

struct FitDiagnostics {
  /// First-stage F statistic per treatment coordinate.
  Vector f_stats;
  bool converged = true;
  std::vector<std::string> flags;
  std::optional<StabilityProfile> stability;
  /// Condition number of the projected 2SLS design.
  double condition = 0.0;
  int dirichlet_iterations = 0;
  double dirichlet_lambda = 0.0;
  std::string message;
};

/// A fitted causal-effect predictor.
///
/// Log-contrast fits (2SLS_ILR, ILR+LC, ALR+LC, DIR+LC, OnlyLC) carry
/// beta_log and beta_ilr = Vᵀ beta_log. Naive 2SLS carries raw coefficients
/// on x_1..x_{p-1}. KIV fits carry a kernel predictor on ilr coordinates or,
/// for diversity fits, on the scalar diversity value.
struct CausalFit {
  Method method = Method::kIlrLc;
  Eigen::Index p = 0;
  Eigen::Index q = 0;
  Eigen::Index n = 0;
  std::optional<LinearFit> linear;
  Vector beta_ilr;
  Vector raw_coef;
  double intercept = 0.0;
  std::optional<KernelFit> kernel;
  std::optional<DiversityKind> diversity;
  /// Diversity fits: the 2SLS slope, or for KIV the least-squares slope of
  /// f̂ against the observed diversity values.
  double slope = 0.0;
  FitDiagnostics diagnostics;

  bool is_log_contrast() const noexcept { return linear.has_value(); }
};

/// Compositions reconstructed from the first-stage OLS fit of Z on log-ratio
/// coordinates; `use_alr` fits on alr instead of ilr coordinates.
Matrix first_stage_compositions(const Matrix& z, const Matrix& x, bool use_alr = false);

/// 2SLS on raw compositions (last part dropped), on ilr coordinates, or on
/// a caller-supplied n×d treatment.
CausalFit fit_2sls_raw(const IVDataset& ds);
CausalFit fit_2sls_ilr(const IVDataset& ds);
TwoStageFit fit_2sls_scalar(const Matrix& z, const Matrix& treatment, const Vector& y);

CausalFit fit_ilr_lc(const IVDataset& ds, const PipelineOptions& options = {});
/// Same estimator as fit_ilr_lc; only the method tag differs.
CausalFit fit_alr_lc(const IVDataset& ds, const PipelineOptions& options = {});
/// Non-convergence of the Dirichlet stage is reported through
/// diagnostics.converged = false and the best parameters found.
CausalFit fit_dir_lc(const IVDataset& ds, const PipelineOptions& options = {});
CausalFit fit_kiv_ilr(const IVDataset& ds, const PipelineOptions& options = {});
CausalFit fit_only_lc(const IVDataset& ds, const PipelineOptions& options = {});

enum class DiversityMethod { kTwoStage, kKiv };
DiversityMethod parse_diversity_method(const std::string& name);

/// Scalar treatment α_i = diversity(x_i).
CausalFit fit_diversity_iv(const IVDataset& ds, DiversityKind measure, DiversityMethod method,
                           const PipelineOptions& options = {});

CausalFit fit_method(Method method, const IVDataset& ds, const PipelineOptions& options = {});

/// f̂(x). Throws ConvergenceError for fits that did not converge and
/// DomainError for compositions with zero parts.
double predict_effect(const CausalFit& fit, const Composition& x);
Vector predict_effect_rows(const CausalFit& fit, const Matrix& x);

}  // namespace compiv
