#include "compiv/metrics.hpp"

#include "compiv/error.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

namespace compiv {

namespace {

void require_same_length(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("coefficient vectors have lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  if (values.size() == 1) {
    s.mean = values[0];
    return s;
  }
  std::tie(s.mean, s.se) = mean_and_se(values);
  return s;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

double oos_mse(const CausalFit& fit, const GroundTruth& truth, const Matrix& x_samples) {
  if (x_samples.rows() < 1) throw DegenerateInputError("no interventional samples");
  const Vector diff = truth.true_effect_rows(x_samples) - predict_effect_rows(fit, x_samples);
  return diff.squaredNorm() / static_cast<double>(x_samples.rows());
}

double beta_mse(const Vector& beta_hat_log, const Vector& beta_true_log) {
  require_same_length(beta_hat_log, beta_true_log);
  if (beta_hat_log.size() == 0) throw DegenerateInputError("empty coefficient vectors");
  if (std::abs(beta_hat_log.sum()) > 1e-6 || std::abs(beta_true_log.sum()) > 1e-6) {
    throw DomainError("beta-MSE compares log-contrast coefficients, which must sum to zero");
  }
  return (beta_hat_log - beta_true_log).squaredNorm();
}

SupportErrors support_errors(const Vector& beta_hat_log, const Vector& beta_true_log, double zero_tol) {
  require_same_length(beta_hat_log, beta_true_log);
  SupportErrors e;
  for (Eigen::Index j = 0; j < beta_hat_log.size(); ++j) {
    const bool est_zero = std::abs(beta_hat_log[j]) <= zero_tol;
    if (beta_true_log[j] != 0.0 && est_zero) ++e.fz;
    if (beta_true_log[j] == 0.0 && !est_zero) ++e.fnz;
  }
  return e;
}

MetricsReport evaluate(const CausalFit& fit, const GroundTruth& truth, const Matrix& x_samples) {
  MetricsReport r;
  r.oos_mse = oos_mse(fit, truth, x_samples);
  r.f_stats = fit.diagnostics.f_stats;
  r.n_interventions = static_cast<int>(x_samples.rows());
  if (fit.linear && truth.linear()) {
    r.beta_mse = beta_mse(fit.linear->beta_log, truth.beta_log());
    const SupportErrors e = support_errors(fit.linear->beta_log, truth.beta_log());
    r.fz = e.fz;
    r.fnz = e.fnz;
  }
  return r;
}

std::pair<double, double> mean_and_se(const std::vector<double>& values) {
  if (values.size() < 2) throw DegenerateInputError("a standard error needs at least two values");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

PipelineOptions seeded_pipeline(PipelineOptions pipeline, std::uint64_t seed) {
  pipeline.stability.seed = derive_seed(seed, stream_tag("stability"));
  pipeline.kiv.split_seed = derive_seed(seed, stream_tag("kiv"));
  return pipeline;
}

BenchmarkRecord run_cell(const Simulation& sim, const Matrix& x_samples, Method method,
                         const PipelineOptions& pipeline) {
  BenchmarkRecord rec;
  rec.preset = sim.truth.spec().preset;
  rec.method = method;
  rec.seed = sim.truth.spec().seed;
  try {
    const CausalFit fit = fit_method(method, sim.data, pipeline);
    rec.metrics = evaluate(fit, sim.truth, x_samples);
    if (!std::isfinite(rec.metrics.oos_mse)) throw ConvergenceError("non-finite out-of-sample error");
    rec.ok = true;
  } catch (const Error& e) {
    rec.ok = false;
    rec.failure = e.what();
  }
  return rec;
}

BenchmarkTable benchmark(const std::vector<std::string>& presets, const std::vector<Method>& methods,
                         const BenchmarkOptions& options) {
  if (options.n_seeds < 2) throw DomainError("benchmark needs at least two seeds for a standard error");
  if (presets.empty() || methods.empty()) throw DomainError("benchmark needs at least one preset and one method");
  if (options.jobs < 1) throw DomainError("jobs must be positive");
  for (const auto& name : presets) make_preset(name, options.base_seed, options.n);

  const std::size_t n_cells = presets.size() * static_cast<std::size_t>(options.n_seeds);
  std::vector<std::vector<BenchmarkRecord>> cells(n_cells);
  auto run = [&](std::size_t cell) {
    const std::string& name = presets[cell / static_cast<std::size_t>(options.n_seeds)];
    const std::uint64_t seed = options.base_seed + cell % static_cast<std::size_t>(options.n_seeds);
    const SimulationSpec spec = make_preset(name, seed, options.n);
    const Simulation sim = generate(spec);
    const Matrix x_samples = interventional_sample(spec, options.n_interventions);
    const PipelineOptions pipeline = seeded_pipeline(options.pipeline, seed);
    for (Method m : methods) cells[cell].push_back(run_cell(sim, x_samples, m, pipeline));
  };
  if (options.jobs == 1) {
    for (std::size_t c = 0; c < n_cells; ++c) run(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(options.jobs), n_cells);
    for (std::size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&] {
        for (std::size_t c = next++; c < n_cells; c = next++) run(c);
      });
    }
    for (auto& t : workers) t.join();
  }

  BenchmarkTable table;
  for (std::size_t pi = 0; pi < presets.size(); ++pi) {
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      BenchmarkRow row;
      row.preset = presets[pi];
      row.method = methods[mi];
      std::vector<double> oos, bmse, fz, fnz, fmin;
      for (int s = 0; s < options.n_seeds; ++s) {
        const BenchmarkRecord& rec = cells[pi * static_cast<std::size_t>(options.n_seeds) + static_cast<std::size_t>(s)][mi];
        if (!rec.ok) {
          ++row.n_failed;
          continue;
        }
        ++row.n_ok;
        oos.push_back(rec.metrics.oos_mse);
        if (rec.metrics.beta_mse) bmse.push_back(*rec.metrics.beta_mse);
        if (rec.metrics.fz) fz.push_back(*rec.metrics.fz);
        if (rec.metrics.fnz) fnz.push_back(*rec.metrics.fnz);
        if (rec.metrics.f_stats.size() > 0) fmin.push_back(rec.metrics.f_stats.minCoeff());
      }
      row.oos_mse = summarize(oos);
      if (!bmse.empty()) row.beta_mse = summarize(bmse);
      if (!fz.empty()) row.fz = summarize(fz);
      if (!fnz.empty()) row.fnz = summarize(fnz);
      if (!fmin.empty()) row.min_f_stat = summarize(fmin);
      table.rows.push_back(std::move(row));
    }
  }
  for (const auto& cell : cells) {
    for (const auto& rec : cell) table.records.push_back(rec);
  }
  return table;
}

std::string format_table_csv(const BenchmarkTable& table) {
  std::ostringstream os;
  os << "preset,method,n_ok,n_failed,oos_mse_mean,oos_mse_se,beta_mse_mean,beta_mse_se,fz_mean,fz_se,fnz_mean,"
        "fnz_se,min_f_mean,min_f_se\n";
  auto opt = [&](const std::optional<Summary>& s) {
    if (s) {
      os << ',' << fmt(s->mean) << ',' << fmt(s->se);
    } else {
      os << ",,";
    }
  };
  for (const auto& r : table.rows) {
    os << r.preset << ',' << display_name(r.method) << ',' << r.n_ok << ',' << r.n_failed;
    if (r.n_ok > 0) {
      os << ',' << fmt(r.oos_mse.mean) << ',' << fmt(r.oos_mse.se);
    } else {
      os << ",,";
    }
    opt(r.beta_mse);
    opt(r.fz);
    opt(r.fnz);
    opt(r.min_f_stat);
    os << '\n';
  }
  return os.str();
}

std::string format_table_text(const BenchmarkTable& table) {
  auto cell = [](const std::optional<Summary>& s, int digits) {
    return s ? fixed(s->mean, digits) + " ± " + fixed(s->se, digits) : std::string("-");
  };
  std::ostringstream os;
  os << std::left << std::setw(12) << "preset" << std::setw(10) << "method" << std::setw(22) << "OOS MSE"
     << std::setw(20) << "beta-MSE" << std::setw(8) << "FZ" << std::setw(8) << "FNZ" << "failed\n";
  for (const auto& r : table.rows) {
    std::string oos = r.n_ok > 0 ? fixed(r.oos_mse.mean, 2) + " ± " + fixed(r.oos_mse.se, 2) : "failed";
    os << std::left << std::setw(12) << r.preset << std::setw(10) << display_name(r.method) << std::setw(22) << oos
       << std::setw(20) << cell(r.beta_mse, 2) << std::setw(8) << (r.fz ? fixed(r.fz->mean, 2) : "-")
       << std::setw(8) << (r.fnz ? fixed(r.fnz->mean, 2) : "-") << r.n_failed << '\n';
  }
  return os.str();
}

std::string format_records_jsonl(const BenchmarkTable& table) {
  std::ostringstream os;
  for (const auto& rec : table.records) {
    nlohmann::ordered_json j;
    j["preset"] = rec.preset;
    j["method"] = display_name(rec.method);
    j["seed"] = rec.seed;
    j["ok"] = rec.ok;
    if (!rec.ok) {
      j["failure"] = rec.failure;
    } else {
      j["oos_mse"] = rec.metrics.oos_mse;
      if (rec.metrics.beta_mse) j["beta_mse"] = *rec.metrics.beta_mse;
      if (rec.metrics.fz) j["fz"] = *rec.metrics.fz;
      if (rec.metrics.fnz) j["fnz"] = *rec.metrics.fnz;
      j["f_stats"] = std::vector<double>(rec.metrics.f_stats.data(),
                                         rec.metrics.f_stats.data() + rec.metrics.f_stats.size());
      j["n_interventions"] = rec.metrics.n_interventions;
    }
    os << j.dump() << '\n';
  }
  return os.str();
}

}  // namespace compiv
