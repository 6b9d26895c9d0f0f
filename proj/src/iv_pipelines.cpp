#include "compiv/iv_pipelines.hpp"

#include "compiv/error.hpp"
#include "compiv/ols.hpp"

#include <cmath>

namespace compiv {

namespace {

struct MethodName {
  Method method;
  const char* cli;
  const char* label;
};

constexpr MethodName kMethodNames[] = {
    {Method::kTwoStage, "2sls", "2SLS"},
    {Method::kTwoStageIlr, "2sls-ilr", "2SLS_ILR"},
    {Method::kIlrLc, "ilr-lc", "ILR+LC"},
    {Method::kAlrLc, "alr-lc", "ALR+LC"},
    {Method::kDirLc, "dir-lc", "DIR+LC"},
    {Method::kKivIlr, "kiv-ilr", "KIV_ILR"},
    {Method::kOnlyLc, "only-lc", "OnlyLC"},
    {Method::kDiversity2sls, "diversity-2sls", "DIV_2SLS"},
    {Method::kDiversityKiv, "diversity-kiv", "DIV_KIV"},
};

CausalFit shell(Method method, const IVDataset& ds) {
  ds.validate();
  CausalFit fit;
  fit.method = method;
  fit.p = ds.p();
  fit.q = ds.q();
  fit.n = ds.n();
  return fit;
}

void attach_linear(CausalFit& fit, LinearFit linear) {
  fit.beta_ilr = beta_log_to_ilr(linear.beta_log, helmert_basis(fit.p));
  fit.intercept = linear.intercept;
  fit.linear = std::move(linear);
}

void second_stage(CausalFit& fit, const Matrix& x_hat, const Vector& y, const PipelineOptions& options) {
  StabilityResult result = stability_select(log_rows(x_hat), y, options.loss, options.stability);
  if (result.empty_selection) fit.diagnostics.flags.push_back("empty-selection");
  fit.diagnostics.stability = std::move(result.profile);
  attach_linear(fit, std::move(result.fit));
}

Vector diversity_values(const Matrix& x, DiversityKind kind) {
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = diversity(Composition(x.row(i).transpose()), kind);
  return out;
}

}  // namespace

std::string to_string(Method method) {
  for (const auto& entry : kMethodNames) {
    if (entry.method == method) return entry.cli;
  }
  return "unknown";
}

std::string display_name(Method method) {
  for (const auto& entry : kMethodNames) {
    if (entry.method == method) return entry.label;
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (const auto& entry : kMethodNames) {
    if (name == entry.cli || name == entry.label) return entry.method;
  }
  throw DomainError("unknown method '" + name + "'");
}

const std::vector<Method>& compositional_methods() {
  static const std::vector<Method> methods{Method::kTwoStage, Method::kTwoStageIlr, Method::kIlrLc, Method::kAlrLc,
                                           Method::kDirLc,    Method::kKivIlr,      Method::kOnlyLc};
  return methods;
}

DiversityMethod parse_diversity_method(const std::string& name) {
  if (name == "2sls") return DiversityMethod::kTwoStage;
  if (name == "kiv") return DiversityMethod::kKiv;
  throw DomainError("unknown diversity method '" + name + "' (expected 2sls or kiv)");
}

Matrix first_stage_compositions(const Matrix& z, const Matrix& x, bool use_alr) {
  require_positive_compositions(x);
  if (use_alr) {
    const Matrix coords = alr_rows(x);
    return alr_inv_rows(fit_ols(z, coords).predict(z));
  }
  const LogRatioBasis basis = helmert_basis(x.cols());
  const Matrix coords = ilr_rows(x, basis);
  return ilr_inv_rows(fit_ols(z, coords).predict(z), basis);
}

TwoStageFit fit_2sls_scalar(const Matrix& z, const Matrix& treatment, const Vector& y) {
  return two_stage_least_squares(z, treatment, y);
}

CausalFit fit_2sls_raw(const IVDataset& ds) {
  CausalFit fit = shell(Method::kTwoStage, ds);
  const Matrix t = ds.x.leftCols(ds.p() - 1);
  fit.diagnostics.f_stats = first_stage_f_stats(ds.z, t);
  const TwoStageFit tsls = two_stage_least_squares(ds.z, t, ds.y);
  fit.raw_coef = tsls.coef;
  fit.intercept = tsls.intercept;
  fit.diagnostics.condition = tsls.condition;
  return fit;
}

CausalFit fit_2sls_ilr(const IVDataset& ds) {
  CausalFit fit = shell(Method::kTwoStageIlr, ds);
  const LogRatioBasis basis = helmert_basis(ds.p());
  const Matrix t = ilr_rows(ds.x, basis);
  fit.diagnostics.f_stats = first_stage_f_stats(ds.z, t);
  const TwoStageFit tsls = two_stage_least_squares(ds.z, t, ds.y);
  fit.diagnostics.condition = tsls.condition;
  fit.linear = LinearFit{beta_ilr_to_log(tsls.coef, basis), tsls.intercept};
  fit.beta_ilr = tsls.coef;
  fit.intercept = tsls.intercept;
  return fit;
}

CausalFit fit_ilr_lc(const IVDataset& ds, const PipelineOptions& options) {
  CausalFit fit = shell(Method::kIlrLc, ds);
  fit.diagnostics.f_stats = first_stage_f_stats(ds.z, ilr_rows(ds.x, helmert_basis(ds.p())));
  second_stage(fit, first_stage_compositions(ds.z, ds.x), ds.y, options);
  return fit;
}

CausalFit fit_alr_lc(const IVDataset& ds, const PipelineOptions& options) {
  CausalFit fit = fit_ilr_lc(ds, options);
  fit.method = Method::kAlrLc;
  return fit;
}

CausalFit fit_dir_lc(const IVDataset& ds, const PipelineOptions& options) {
  CausalFit fit = shell(Method::kDirLc, ds);
  fit.diagnostics.f_stats = first_stage_f_stats(ds.z, ilr_rows(ds.x, helmert_basis(ds.p())));
  DirichletGLM glm;
  DirichletDiagnostics dd;
  try {
    glm = fit_dirichlet_glm(ds.z, ds.x, options.dirichlet, &dd);
  } catch (const DirichletConvergenceError& e) {
    glm = e.best();
    dd = e.diagnostics();
    fit.diagnostics.converged = false;
    fit.diagnostics.flags.push_back("dirichlet-not-converged");
    fit.diagnostics.message = e.what();
  }
  fit.diagnostics.dirichlet_iterations = dd.iterations;
  fit.diagnostics.dirichlet_lambda = glm.lambda;
  const Matrix x_hat = glm.predict_mean_rows(ds.z);
  if (!x_hat.allFinite() || (x_hat.array() <= 0.0).any()) {
    fit.diagnostics.converged = false;
    fit.diagnostics.flags.push_back("dirichlet-degenerate-mean");
    if (fit.diagnostics.message.empty()) fit.diagnostics.message = "Dirichlet predicted means left the open simplex";
    attach_linear(fit, LinearFit{Vector::Zero(ds.p()), ds.y.mean()});
    return fit;
  }
  second_stage(fit, x_hat, ds.y, options);
  return fit;
}

CausalFit fit_kiv_ilr(const IVDataset& ds, const PipelineOptions& options) {
  CausalFit fit = shell(Method::kKivIlr, ds);
  const Matrix coords = ilr_rows(ds.x, helmert_basis(ds.p()));
  fit.diagnostics.f_stats = first_stage_f_stats(ds.z, coords);
  fit.kernel = fit_kiv(ds.z, coords, ds.y, options.kiv);
  if (fit.kernel->subsampled) fit.diagnostics.flags.push_back("kiv-subsampled");
  fit.intercept = fit.kernel->y_offset;
  return fit;
}

CausalFit fit_only_lc(const IVDataset& ds, const PipelineOptions& options) {
  CausalFit fit = shell(Method::kOnlyLc, ds);
  second_stage(fit, ds.x, ds.y, options);
  return fit;
}

CausalFit fit_diversity_iv(const IVDataset& ds, DiversityKind measure, DiversityMethod method,
                           const PipelineOptions& options) {
  CausalFit fit = shell(method == DiversityMethod::kKiv ? Method::kDiversityKiv : Method::kDiversity2sls, ds);
  fit.diversity = measure;
  const Matrix alpha = diversity_values(ds.x, measure);
  fit.diagnostics.f_stats = first_stage_f_stats(ds.z, alpha);
  if (method == DiversityMethod::kTwoStage) {
    const TwoStageFit tsls = two_stage_least_squares(ds.z, alpha, ds.y);
    fit.raw_coef = tsls.coef;
    fit.slope = tsls.coef[0];
    fit.intercept = tsls.intercept;
    fit.diagnostics.condition = tsls.condition;
    return fit;
  }
  fit.kernel = fit_kiv(ds.z, alpha, ds.y, options.kiv);
  if (fit.kernel->subsampled) fit.diagnostics.flags.push_back("kiv-subsampled");
  const Vector f_hat = fit.kernel->predict_rows(alpha);
  const Vector a = alpha.col(0);
  const double a_mean = a.mean();
  const double var = (a.array() - a_mean).square().sum();
  if (!(var > 0.0)) throw DegenerateInputError("diversity values are constant");
  fit.slope = ((a.array() - a_mean) * (f_hat.array() - f_hat.mean())).sum() / var;
  fit.raw_coef = Vector::Constant(1, fit.slope);
  fit.intercept = fit.kernel->y_offset;
  return fit;
}

CausalFit fit_method(Method method, const IVDataset& ds, const PipelineOptions& options) {
  switch (method) {
    case Method::kTwoStage: return fit_2sls_raw(ds);
    case Method::kTwoStageIlr: return fit_2sls_ilr(ds);
    case Method::kIlrLc: return fit_ilr_lc(ds, options);
    case Method::kAlrLc: return fit_alr_lc(ds, options);
    case Method::kDirLc: return fit_dir_lc(ds, options);
    case Method::kKivIlr: return fit_kiv_ilr(ds, options);
    case Method::kOnlyLc: return fit_only_lc(ds, options);
    case Method::kDiversity2sls:
      return fit_diversity_iv(ds, DiversityKind::kShannon, DiversityMethod::kTwoStage, options);
    case Method::kDiversityKiv:
      return fit_diversity_iv(ds, DiversityKind::kShannon, DiversityMethod::kKiv, options);
  }
  throw DomainError("unknown method");
}

Vector predict_effect_rows(const CausalFit& fit, const Matrix& x) {
  if (!fit.diagnostics.converged) {
    throw ConvergenceError("fit did not converge: " +
                           (fit.diagnostics.message.empty() ? std::string("no estimate") : fit.diagnostics.message));
  }
  if (x.cols() != fit.p) {
    throw DimensionError("composition has " + std::to_string(x.cols()) + " parts, fit expects " +
                         std::to_string(fit.p));
  }
  require_positive_compositions(x);
  if (fit.diversity) {
    const Matrix alpha = diversity_values(x, *fit.diversity);
    if (fit.kernel) return fit.kernel->predict_rows(alpha);
    return (alpha * fit.raw_coef).array() + fit.intercept;
  }
  if (fit.linear) return log_rows(x) * fit.linear->beta_log + Vector::Constant(x.rows(), fit.linear->intercept);
  if (fit.kernel) return fit.kernel->predict_rows(ilr_rows(x, helmert_basis(fit.p)));
  return (x.leftCols(fit.p - 1) * fit.raw_coef).array() + fit.intercept;
}

double predict_effect(const CausalFit& fit, const Composition& x) {
  Matrix row(1, x.size());
  row.row(0) = x.parts().transpose();
  return predict_effect_rows(fit, row)[0];
}

}  // namespace compiv
