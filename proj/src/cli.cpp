#include "compiv/cli.hpp"

#include "compiv/datagen.hpp"
#include "compiv/error.hpp"
#include "compiv/io.hpp"
#include "compiv/iv_pipelines.hpp"
#include "compiv/metrics.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>

namespace compiv {

namespace {

/// Failure in flags or config files; exits with kExitConfig.
struct ConfigError : Error {
  using Error::Error;
};

std::uint64_t default_seed() {
  const char* env = std::getenv("COMPIV_SEED");
  if (!env || !*env) return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("COMPIV_SEED is not an unsigned integer: '") + env + "'");
  }
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

std::string stem_of(const std::string& data_path) {
  const auto dot = data_path.rfind(".csv");
  return dot != std::string::npos && dot + 4 == data_path.size() ? data_path.substr(0, dot) : data_path;
}

PipelineOptions pipeline_from(double threshold, int resamples, const std::string& loss, std::uint64_t seed) {
  PipelineOptions p;
  p.loss = parse_loss(loss);
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
  if (resamples < 10) throw ConfigError("at least 10 resamples are required");
  p.stability.threshold = threshold;
  p.stability.n_resamples = resamples;
  return seeded_pipeline(p, seed);
}

struct SimulateArgs {
  std::string preset;
  std::string config;
  std::string setting;
  int p = 0;
  int q = 0;
  int n = 0;
  std::optional<std::uint64_t> seed;
  std::string out = "simulation.csv";
  std::string truth;
  int interventions = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const std::uint64_t seed = a.seed.value_or(default_seed());
  SimulationSpec spec;
  if (!a.config.empty()) {
    if (!a.preset.empty()) throw ConfigError("give either --preset or --config, not both");
    spec = spec_from_json(read_json_file(a.config));
    if (a.seed || std::getenv("COMPIV_SEED")) spec.seed = seed;
    if (a.n) spec.n = a.n;
  } else {
    if (a.preset.empty()) throw ConfigError("simulate needs --preset or --config");
    spec = make_preset(a.preset, seed, a.n);
  }
  if (!a.setting.empty() && parse_setting(a.setting) != spec.setting) {
    throw ConfigError("--setting " + a.setting + " does not match the scenario's setting " + to_string(spec.setting));
  }
  if (a.p && a.p != spec.p) throw ConfigError("--p does not match the scenario's p = " + std::to_string(spec.p));
  if (a.q && a.q != spec.q) throw ConfigError("--q does not match the scenario's q = " + std::to_string(spec.q));
  spec.validate();
  const Simulation sim = generate(spec);
  write_dataset_csv_file(a.out, sim.data);
  const std::string truth = a.truth.empty() ? stem_of(a.out) + ".truth.json" : a.truth;
  write_text_file(truth, truth_to_json(sim.truth).dump(2) + "\n");
  out << "wrote " << sim.data.n() << " samples to " << a.out << " and ground truth to " << truth << "\n";
  if (sim.data.pseudo_counted) out << "zero counts present: pseudo-count " << spec.b.pseudo_count << " applied\n";
  if (a.interventions > 0) {
    const std::string path = stem_of(a.out) + ".interventions.csv";
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    write_compositions_csv(f, interventional_sample(spec, a.interventions));
    out << "wrote " << a.interventions << " interventional compositions to " << path << "\n";
  }
  return kExitOk;
}

struct FitArgs {
  std::string method;
  std::string data;
  double pseudo_count = kDefaultPseudoCount;
  double threshold = kDefaultStabilityThreshold;
  int resamples = 50;
  std::string loss = "squared";
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(a.method);
  if (method == Method::kDiversity2sls || method == Method::kDiversityKiv) {
    throw ConfigError("use the diversity-iv command for diversity treatments");
  }
  const IVDataset ds = read_dataset_csv_file(a.data, nullptr, a.pseudo_count);
  if (ds.pseudo_counted) err << "zero entries present: pseudo-count " << a.pseudo_count << " applied\n";
  const PipelineOptions options = pipeline_from(a.threshold, a.resamples, a.loss, a.seed.value_or(default_seed()));
  const CausalFit fit = fit_method(method, ds, options);
  emit(a.out, fit_to_json(fit).dump(2) + "\n", out);
  if (!fit.diagnostics.converged) {
    err << "fit did not converge: " << fit.diagnostics.message << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string fit;
  std::string truth;
  int m = kDefaultInterventions;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const CausalFit fit = fit_from_json(read_json_file(a.fit));
  const GroundTruth truth = truth_from_json(read_json_file(a.truth));
  const Matrix xs = interventional_sample(truth.spec(), a.m, a.seed);
  const MetricsReport r = evaluate(fit, truth, xs);
  Json j;
  j["method"] = display_name(fit.method);
  j["oos_mse"] = r.oos_mse;
  if (r.beta_mse) j["beta_mse"] = *r.beta_mse;
  if (r.fz) j["fz"] = *r.fz;
  if (r.fnz) j["fnz"] = *r.fnz;
  j["f_stats"] = std::vector<double>(r.f_stats.data(), r.f_stats.data() + r.f_stats.size());
  j["n_interventions"] = r.n_interventions;
  emit(a.out, j.dump(2) + "\n", out);
  return kExitOk;
}

struct BenchmarkArgs {
  std::string config;
  std::vector<std::string> presets;
  std::vector<std::string> methods;
  int seeds = 0;
  std::optional<std::uint64_t> base_seed;
  int n = 0;
  int m = kDefaultInterventions;
  int jobs = 1;
  double threshold = kDefaultStabilityThreshold;
  int resamples = 50;
  std::string csv;
  std::string text;
  std::string jsonl;
};

void apply_benchmark_config(BenchmarkArgs& a) {
  const Json j = read_json_file(a.config);
  static const std::set<std::string> allowed{"presets",   "methods",   "seeds", "base_seed", "n",   "n_interventions",
                                             "jobs",      "threshold", "resamples", "csv",   "text", "jsonl"};
  if (!j.is_object()) throw ConfigError("benchmark config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in benchmark config");
  }
  try {
    if (j.contains("presets")) a.presets = j.at("presets").get<std::vector<std::string>>();
    if (j.contains("methods")) a.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("seeds")) a.seeds = j.at("seeds").get<int>();
    if (j.contains("base_seed")) a.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("n")) a.n = j.at("n").get<int>();
    if (j.contains("n_interventions")) a.m = j.at("n_interventions").get<int>();
    if (j.contains("jobs")) a.jobs = j.at("jobs").get<int>();
    if (j.contains("threshold")) a.threshold = j.at("threshold").get<double>();
    if (j.contains("resamples")) a.resamples = j.at("resamples").get<int>();
    if (j.contains("csv")) a.csv = j.at("csv").get<std::string>();
    if (j.contains("text")) a.text = j.at("text").get<std::string>();
    if (j.contains("jsonl")) a.jsonl = j.at("jsonl").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("benchmark config has a value of the wrong type: ") + e.what());
  }
}

int cmd_benchmark(BenchmarkArgs a, std::ostream& out) {
  if (!a.config.empty()) apply_benchmark_config(a);
  if (a.presets.empty()) throw ConfigError("benchmark needs at least one preset");
  if (a.seeds == 0) a.seeds = 2;
  std::vector<Method> methods;
  if (a.methods.empty()) {
    methods = compositional_methods();
  } else {
    for (const auto& m : a.methods) methods.push_back(parse_method(m));
  }
  BenchmarkOptions options;
  options.n_seeds = a.seeds;
  options.base_seed = a.base_seed.value_or(default_seed());
  options.n = a.n;
  options.n_interventions = a.m;
  options.jobs = a.jobs;
  options.pipeline = pipeline_from(a.threshold, a.resamples, "squared", 0);
  const BenchmarkTable table = benchmark(a.presets, methods, options);
  if (!a.csv.empty()) write_text_file(a.csv, format_table_csv(table));
  if (!a.jsonl.empty()) write_text_file(a.jsonl, format_records_jsonl(table));
  if (!a.text.empty()) write_text_file(a.text, format_table_text(table));
  if (a.csv.empty() && a.text.empty() && a.jsonl.empty()) out << format_table_csv(table);
  return kExitOk;
}

struct DiversityArgs {
  std::string data;
  std::string counts;
  std::vector<std::string> instrument_cols;
  std::string outcome_col;
  std::vector<std::string> measures{"shannon", "simpson"};
  std::string method = "2sls";
  double pseudo_count = kDefaultPseudoCount;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_diversity(const DiversityArgs& a, std::ostream& out) {
  IVDataset ds;
  if (!a.data.empty() == !a.counts.empty()) throw ConfigError("give exactly one of --data or --counts-csv");
  if (!a.data.empty()) {
    ds = read_dataset_csv_file(a.data, nullptr, a.pseudo_count);
  } else {
    IngestOptions io;
    io.instrument_cols = a.instrument_cols;
    io.outcome_col = a.outcome_col;
    io.pseudo_count = a.pseudo_count;
    ds = ingest_counts(read_csv_file(a.counts), io);
  }
  const DiversityMethod method = parse_diversity_method(a.method);
  PipelineOptions options = seeded_pipeline({}, a.seed.value_or(default_seed()));
  Json results = Json::array();
  for (const auto& name : a.measures) {
    const CausalFit fit = fit_diversity_iv(ds, parse_diversity_kind(name), method, options);
    Json r;
    r["measure"] = name;
    r["method"] = a.method;
    r["slope"] = fit.slope;
    r["intercept"] = fit.intercept;
    r["f_stat"] = fit.diagnostics.f_stats.size() ? fit.diagnostics.f_stats[0] : 0.0;
    results.push_back(std::move(r));
  }
  Json j;
  j["n"] = ds.n();
  j["p"] = ds.p();
  j["q"] = ds.q();
  j["pseudo_counted"] = ds.pseudo_counted;
  j["results"] = std::move(results);
  emit(a.out, j.dump(2) + "\n", out);
  return kExitOk;
}

struct IngestArgs {
  std::string counts;
  std::vector<std::string> instrument_cols;
  std::string outcome_col;
  bool binary = false;
  double pseudo_count = kDefaultPseudoCount;
  std::string out;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  IngestOptions io;
  io.instrument_cols = a.instrument_cols;
  io.outcome_col = a.outcome_col;
  io.binary = a.binary;
  io.pseudo_count = a.pseudo_count;
  std::vector<std::string> taxa;
  const IVDataset ds = ingest_counts(read_csv_file(a.counts), io, &taxa);
  if (a.out.empty() || a.out == "-") {
    write_dataset_csv(out, ds);
  } else {
    write_dataset_csv_file(a.out, ds);
  }
  err << "ingested " << ds.n() << " samples with " << taxa.size() << " taxa";
  if (ds.pseudo_counted) err << " (pseudo-count " << a.pseudo_count << " applied)";
  err << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal effects of compositional treatments with instrumental variables", "compiv"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic dataset and its ground truth");
  s->add_option("--preset", sim.preset, "Named scenario: A-p3, A-p30, A-p250, A-weak, A-nonlinear, B-p3, B-p30, B-p250, diversity");
  s->add_option("--config", sim.config, "Scenario JSON with setting, p, q, n, seed and params");
  s->add_option("--setting", sim.setting, "Expected setting (A, A-nonlinear, A-weak, B); checked against the scenario");
  s->add_option("--p", sim.p, "Expected number of parts; checked against the scenario");
  s->add_option("--q", sim.q, "Expected number of instruments; checked against the scenario");
  s->add_option("--n", sim.n, "Sample size (default: the scenario's)");
  s->add_option("--seed", sim.seed, "Scenario seed (default: COMPIV_SEED or 0)");
  s->add_option("--out", sim.out, "Dataset CSV path")->capture_default_str();
  s->add_option("--truth", sim.truth, "Ground-truth JSON path (default: <out stem>.truth.json)");
  s->add_option("--interventions", sim.interventions, "Also write this many interventional compositions");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit a causal-effect estimator to a dataset CSV");
  f->add_option("--method", fit.method, "2sls, 2sls-ilr, ilr-lc, alr-lc, dir-lc, kiv-ilr or only-lc")->required();
  f->add_option("--data", fit.data, "Dataset CSV (z_*, x_*, y)")->required();
  f->add_option("--pseudo-count", fit.pseudo_count, "Added to all x values when any is zero")->capture_default_str();
  f->add_option("--threshold", fit.threshold, "Stability-selection threshold (0.65 suits real data)")->capture_default_str();
  f->add_option("--resamples", fit.resamples, "Stability-selection subsamples")->capture_default_str();
  f->add_option("--loss", fit.loss, "squared, huber, squared-hinge or huberized-hinge")->capture_default_str();
  f->add_option("--seed", fit.seed, "Seed of the subsampling and sample split (default: COMPIV_SEED or 0)");
  f->add_option("--out", fit.out, "Fit JSON path (default: stdout)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a fit against a ground truth on fresh interventions");
  e->add_option("--fit", ev.fit, "Fit JSON")->required();
  e->add_option("--truth", ev.truth, "Ground-truth JSON")->required();
  e->add_option("--m", ev.m, "Number of interventional samples")->capture_default_str();
  e->add_option("--seed", ev.seed, "Intervention seed (default: the scenario seed)");
  e->add_option("--out", ev.out, "Metrics JSON path (default: stdout)");

  BenchmarkArgs bm;
  auto* b = app.add_subcommand("benchmark", "Run methods over presets and seeds");
  b->add_option("--config", bm.config, "Benchmark JSON; keys: presets, methods, seeds, base_seed, n, n_interventions, jobs, threshold, resamples, csv, text, jsonl");
  b->add_option("--preset", bm.presets, "Preset name (repeatable)");
  b->add_option("--methods", bm.methods, "Methods (default: all seven)")->delimiter(',');
  b->add_option("--seeds", bm.seeds, "Seeds per preset, at least 2");
  b->add_option("--base-seed", bm.base_seed, "First seed (default: COMPIV_SEED or 0)");
  b->add_option("--n", bm.n, "Sample size override");
  b->add_option("--m", bm.m, "Interventional samples per seed")->capture_default_str();
  b->add_option("--jobs", bm.jobs, "Parallel seeds")->capture_default_str();
  b->add_option("--threshold", bm.threshold, "Stability-selection threshold")->capture_default_str();
  b->add_option("--resamples", bm.resamples, "Stability-selection subsamples")->capture_default_str();
  b->add_option("--csv", bm.csv, "Summary table CSV");
  b->add_option("--text", bm.text, "Summary table as aligned text");
  b->add_option("--jsonl", bm.jsonl, "Per-seed records as JSON lines");

  DiversityArgs dv;
  auto* d = app.add_subcommand("diversity-iv", "IV estimate of the effect of a diversity index");
  d->add_option("--data", dv.data, "Dataset CSV (z_*, x_*, y)");
  d->add_option("--counts-csv", dv.counts, "Sample-per-row count table");
  d->add_option("--instrument-col", dv.instrument_cols, "Instrument column of the count table (repeatable)");
  d->add_option("--outcome-col", dv.outcome_col, "Outcome column of the count table");
  d->add_option("--measure", dv.measures, "shannon, simpson or richness (repeatable)")->capture_default_str();
  d->add_option("--method", dv.method, "2sls or kiv")->capture_default_str();
  d->add_option("--pseudo-count", dv.pseudo_count, "Added to all counts when any is zero")->capture_default_str();
  d->add_option("--seed", dv.seed, "Seed of the KIV sample split (default: COMPIV_SEED or 0)");
  d->add_option("--out", dv.out, "Result JSON path (default: stdout)");

  IngestArgs ig;
  auto* g = app.add_subcommand("ingest", "Turn a count table into a dataset CSV");
  g->add_option("--counts-csv", ig.counts, "Sample-per-row count table")->required();
  g->add_option("--instrument-col", ig.instrument_cols, "Instrument column (repeatable)")->required();
  g->add_option("--outcome-col", ig.outcome_col, "Outcome column")->required();
  g->add_flag("--binary", ig.binary, "Split the outcome at its mean into -1/+1 labels");
  g->add_option("--pseudo-count", ig.pseudo_count, "Added to all counts when any is zero")->capture_default_str();
  g->add_option("--out", ig.out, "Dataset CSV path (default: stdout)");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim, out);
    if (f->parsed()) return cmd_fit(fit, out, err);
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (b->parsed()) return cmd_benchmark(bm, out);
    if (d->parsed()) return cmd_diversity(dv, out);
    if (g->parsed()) return cmd_ingest(ig, out, err);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const RankDeficientError& ex) {
    err << "numerical failure: " << ex.what() << "\n";
    return kExitNumerical;
  } catch (const ConvergenceError& ex) {
    err << "numerical failure: " << ex.what() << "\n";
    return kExitNumerical;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace compiv
