#pragma once

#include "compiv/datagen.hpp"
#include "compiv/iv_pipelines.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace compiv {

inline constexpr double kSupportTolerance = 1e-8;

/// (1/m) Σ (true_effect(x_i) - f̂(x_i))² over the rows of x_samples.
double oos_mse(const CausalFit& fit, const GroundTruth& truth, const Matrix& x_samples);

/// Σ (β̂ⱼ - βⱼ)² in log-contrast coordinates, summed over the p parts;
/// both vectors must sum to zero within 1e-6.
double beta_mse(const Vector& beta_hat_log, const Vector& beta_true_log);

struct SupportErrors {
  int fz = 0;   ///< true non-zero estimated as zero
  int fnz = 0;  ///< true zero estimated as non-zero
};

SupportErrors support_errors(const Vector& beta_hat_log, const Vector& beta_true_log,
                             double zero_tol = kSupportTolerance);

struct MetricsReport {
  double oos_mse = 0.0;
  std::optional<double> beta_mse;
  std::optional<int> fz;
  std::optional<int> fnz;
  Vector f_stats;
  int n_interventions = 0;
};

/// β-MSE, FZ and FNZ are filled only for log-contrast fits on scenarios with
/// a linear truth.
MetricsReport evaluate(const CausalFit& fit, const GroundTruth& truth, const Matrix& x_samples);

/// Sample mean and standard error sd/√n (sd with n - 1 in the denominator).
std::pair<double, double> mean_and_se(const std::vector<double>& values);

struct BenchmarkOptions {
  int n_seeds = 2;
  std::uint64_t base_seed = 0;
  /// Overrides every preset's sample size when positive.
  int n = 0;
  int n_interventions = kDefaultInterventions;
  int jobs = 1;
  PipelineOptions pipeline;
};

struct BenchmarkRecord {
  std::string preset;
  Method method = Method::kIlrLc;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  MetricsReport metrics;
};

struct Summary {
  int count = 0;
  double mean = 0.0;
  double se = 0.0;
};

struct BenchmarkRow {
  std::string preset;
  Method method = Method::kIlrLc;
  int n_ok = 0;
  int n_failed = 0;
  Summary oos_mse;
  std::optional<Summary> beta_mse;
  std::optional<Summary> fz;
  std::optional<Summary> fnz;
  /// Mean over seeds of the smallest first-stage F statistic.
  std::optional<Summary> min_f_stat;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;        ///< preset-major, methods in the given order
  std::vector<BenchmarkRecord> records;  ///< every (preset, seed, method) cell
};

/// Seed k of a preset is base_seed + k. Each seed generates one dataset and
/// one interventional sample shared by all methods. Fit failures become
/// failure records and never abort the sweep.
BenchmarkTable benchmark(const std::vector<std::string>& presets, const std::vector<Method>& methods,
                         const BenchmarkOptions& options);

/// Runs one method on one seed of a preset; failures are captured.
BenchmarkRecord run_cell(const Simulation& sim, const Matrix& x_samples, Method method,
                         const PipelineOptions& pipeline);

/// Seeds of the stochastic pipeline stages (stability subsamples, KIV split)
/// derived from the dataset seed.
PipelineOptions seeded_pipeline(PipelineOptions pipeline, std::uint64_t seed);

std::string format_table_csv(const BenchmarkTable& table);
std::string format_table_text(const BenchmarkTable& table);
std::string format_records_jsonl(const BenchmarkTable& table);

}  // namespace compiv
