#include "doctest.h"

#include "compiv/datagen.hpp"
#include "compiv/error.hpp"
#include "compiv/iv_pipelines.hpp"

#include <cmath>

using namespace compiv;

namespace {

IVDataset preset_data(const std::string& name, std::uint64_t seed, int n) {
  return generate(make_preset(name, seed, n)).data;
}

Matrix log_of(const Matrix& x) { return x.array().log().matrix(); }

}  // namespace

TEST_CASE("method names round-trip") {
  for (Method m : compositional_methods()) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK(compositional_methods().size() == 7);
  CHECK(display_name(Method::kIlrLc) == "ILR+LC");
  CHECK(display_name(Method::kTwoStage) == "2SLS");
  CHECK(display_name(Method::kOnlyLc) == "OnlyLC");
  CHECK(to_string(Method::kKivIlr) == "kiv-ilr");
  CHECK_THROWS_AS(parse_method("ols"), DomainError);
}

TEST_CASE("every compositional method produces finite predictions") {
  const SimulationSpec spec = make_preset("A-p3", 3, 300);
  const IVDataset ds = generate(spec).data;
  const Matrix x_new = interventional_sample(spec, 40);
  PipelineOptions options;
  options.stability.n_resamples = 20;
  for (Method m : compositional_methods()) {
    CAPTURE(to_string(m));
    const CausalFit fit = fit_method(m, ds, options);
    CHECK(fit.method == m);
    CHECK(fit.p == 3);
    CHECK(fit.q == 2);
    CHECK(fit.n == 300);
    CHECK(predict_effect_rows(fit, x_new).allFinite());
    if (fit.is_log_contrast()) {
      CHECK(std::abs(fit.linear->beta_log.sum()) <= 1e-8);
      CHECK(fit.beta_ilr.size() == 2);
      const Vector direct = (log_of(x_new) * fit.linear->beta_log).array() + fit.linear->intercept;
      CHECK((predict_effect_rows(fit, x_new) - direct).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("two-stage least squares on ilr coordinates recovers the slope") {
  Vector mean = Vector::Zero(2);
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    const CausalFit fit = fit_2sls_ilr(preset_data("A-p3", 20 + s, 5000));
    REQUIRE(fit.is_log_contrast());
    CHECK(fit.diagnostics.f_stats.size() == 2);
    CHECK((fit.diagnostics.f_stats.array() > 10.0).all());
    mean += fit.beta_ilr / seeds;
  }
  CHECK(std::abs(mean[0] - 4.0) < 0.4);
  CHECK(std::abs(mean[1] - 1.0) < 0.4);
}

TEST_CASE("raw 2SLS drops the last part") {
  const IVDataset ds = preset_data("A-p3", 6, 300);
  const CausalFit fit = fit_2sls_raw(ds);
  CHECK(fit.raw_coef.size() == 2);
  CHECK_FALSE(fit.is_log_contrast());
  const Composition x = closure(Vector{{0.2, 0.3, 0.5}});
  CHECK(predict_effect(fit, x) == doctest::Approx(fit.intercept + 0.2 * fit.raw_coef[0] + 0.3 * fit.raw_coef[1]));
}

TEST_CASE("without confounding the two-stage and direct fits agree") {
  SimulationSpec spec = make_preset("A-p3", 7, 3000);
  spec.a.c_y = 0.0;
  const IVDataset ds = generate(spec).data;
  PipelineOptions options;
  options.stability.n_resamples = 20;
  const CausalFit two_stage = fit_ilr_lc(ds, options);
  const CausalFit direct = fit_only_lc(ds, options);
  CHECK((direct.linear->beta_log - spec.a.beta_log).cwiseAbs().maxCoeff() < 0.1);
  CHECK((two_stage.linear->beta_log - spec.a.beta_log).cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("confounding biases the direct fit but not the two-stage fit") {
  const SimulationSpec spec = make_preset("A-p3", 8, 3000);
  const IVDataset ds = generate(spec).data;
  PipelineOptions options;
  options.stability.n_resamples = 20;
  const double two_stage = (fit_ilr_lc(ds, options).linear->beta_log - spec.a.beta_log).squaredNorm();
  const double direct = (fit_only_lc(ds, options).linear->beta_log - spec.a.beta_log).squaredNorm();
  CHECK(two_stage < direct / 5.0);
}

TEST_CASE("alr first stage gives the same estimator as ilr") {
  const IVDataset ds = preset_data("A-p3", 9, 400);
  PipelineOptions options;
  options.stability.n_resamples = 10;
  const CausalFit ilr = fit_ilr_lc(ds, options);
  const CausalFit alr = fit_alr_lc(ds, options);
  CHECK(alr.method == Method::kAlrLc);
  CHECK((ilr.linear->beta_log - alr.linear->beta_log).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((first_stage_compositions(ds.z, ds.x) - first_stage_compositions(ds.z, ds.x, true)).cwiseAbs().maxCoeff() <=
        1e-10);
}

TEST_CASE("a non-converged dirichlet stage refuses to predict") {
  const IVDataset ds = preset_data("A-p3", 10, 300);
  PipelineOptions options;
  options.dirichlet.max_iterations = 1;
  options.stability.n_resamples = 10;
  const CausalFit fit = fit_dir_lc(ds, options);
  CHECK_FALSE(fit.diagnostics.converged);
  CHECK_THROWS_AS(predict_effect_rows(fit, ds.x), ConvergenceError);
}

TEST_CASE("prediction input checks") {
  const IVDataset ds = preset_data("A-p3", 11, 200);
  const CausalFit fit = fit_2sls_ilr(ds);
  CHECK_THROWS_AS(predict_effect_rows(fit, Matrix::Constant(2, 4, 0.25)), DimensionError);
  Matrix zero_part(1, 3);
  zero_part << 0.5, 0.5, 0.0;
  CHECK_THROWS_AS(predict_effect_rows(fit, zero_part), DomainError);
}

TEST_CASE("kernel fit predicts on ilr coordinates") {
  const SimulationSpec spec = make_preset("A-p3", 12, 400);
  const IVDataset ds = generate(spec).data;
  const CausalFit fit = fit_kiv_ilr(ds);
  REQUIRE(fit.kernel.has_value());
  CHECK(fit.kernel->x_train.cols() == 2);
  CHECK(predict_effect_rows(fit, interventional_sample(spec, 30)).allFinite());
}

TEST_CASE("diversity fits") {
  const IVDataset ds = preset_data("diversity", 1, 1000);
  const CausalFit shannon = fit_diversity_iv(ds, DiversityKind::kShannon, DiversityMethod::kTwoStage);
  const CausalFit simpson = fit_diversity_iv(ds, DiversityKind::kSimpson, DiversityMethod::kTwoStage);
  CHECK(shannon.diversity == DiversityKind::kShannon);
  CHECK(std::isfinite(shannon.slope));
  CHECK(shannon.slope * simpson.slope < 0.0);
  const CausalFit kiv = fit_diversity_iv(ds, DiversityKind::kShannon, DiversityMethod::kKiv);
  CHECK(kiv.method == Method::kDiversityKiv);
  CHECK(std::isfinite(kiv.slope));
  CHECK(parse_diversity_method("kiv") == DiversityMethod::kKiv);
  CHECK(parse_diversity_method("2sls") == DiversityMethod::kTwoStage);
  // Strictly positive compositions all have full richness.
  CHECK_THROWS_AS(fit_diversity_iv(ds, DiversityKind::kRichness, DiversityMethod::kTwoStage), Error);
}
