#include "compiv/io.hpp"

#include "compiv/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace compiv {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(b, e - b + 1);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw DomainError("non-numeric cell '" + cell + "' in row " + std::to_string(row) + ", column '" + column + "'");
  }
  return v;
}

Json vec(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json mat(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec(m.row(i).transpose()));
  return rows;
}

Vector to_vector(const Json& j, const char* name) {
  if (!j.is_array()) throw DomainError(std::string(name) + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw DomainError(std::string(name) + " must be an array of numbers");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

Matrix to_matrix(const Json& j, const char* name) {
  if (!j.is_array()) throw DomainError(std::string(name) + " must be an array of rows");
  if (j.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = to_vector(j[i], name);
    if (row.size() != m.cols()) throw DomainError(std::string(name) + " rows have different lengths");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw DomainError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw DomainError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw DomainError("missing key '" + std::string(key) + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DomainError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw DomainError("column '" + name + "' not found");
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DegenerateInputError("CSV input is empty");
  t.header = split(line);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw DimensionError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                           " cells, header has " + std::to_string(t.header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) values[k] = parse_number(cells[k], row, t.header[k]);
    t.rows.push_back(std::move(values));
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open '" + path + "'");
  return read_csv(in);
}

void write_dataset_csv(std::ostream& out, const IVDataset& ds) {
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < ds.q(); ++j) out << "z_" << j + 1 << ',';
  for (Eigen::Index j = 0; j < ds.p(); ++j) out << "x_" << j + 1 << ',';
  out << "y\n";
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.q(); ++j) out << ds.z(i, j) << ',';
    for (Eigen::Index j = 0; j < ds.p(); ++j) out << ds.x(i, j) << ',';
    out << ds.y[i] << '\n';
  }
}

void write_dataset_csv_file(const std::string& path, const IVDataset& ds) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write '" + path + "'");
  write_dataset_csv(out, ds);
}

IVDataset read_dataset_csv(std::istream& in, int* reclosed, std::optional<double> pseudo_count) {
  const CsvTable t = read_csv(in);
  std::vector<std::size_t> zc;
  std::vector<std::size_t> xc;
  for (int k = 1;; ++k) {
    const std::string name = "z_" + std::to_string(k);
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) break;
    zc.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  for (int k = 1;; ++k) {
    const std::string name = "x_" + std::to_string(k);
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) break;
    xc.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  const std::size_t yc = t.column("y");
  if (zc.empty()) throw DimensionError("dataset CSV has no z_1 column");
  if (xc.size() < 2) throw DimensionError("dataset CSV needs at least x_1 and x_2");
  if (zc.size() + xc.size() + 1 != t.header.size()) throw DomainError("dataset CSV has unexpected columns");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  IVDataset ds;
  ds.z.resize(n, static_cast<Eigen::Index>(zc.size()));
  ds.x.resize(n, static_cast<Eigen::Index>(xc.size()));
  ds.y.resize(n);
  Matrix raw(n, static_cast<Eigen::Index>(xc.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = t.rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < zc.size(); ++k) ds.z(i, static_cast<Eigen::Index>(k)) = r[zc[k]];
    for (std::size_t k = 0; k < xc.size(); ++k) raw(i, static_cast<Eigen::Index>(k)) = r[xc[k]];
    ds.y[i] = r[yc];
  }
  int count = 0;
  if (pseudo_count && (raw.array() == 0.0).any()) {
    ds.x = close_counts(raw, *pseudo_count, &ds.pseudo_counted);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Composition c(raw.row(i).transpose());
      if (c.reclosed()) ++count;
      ds.x.row(i) = c.parts().transpose();
    }
  }
  if (reclosed) *reclosed = count;
  ds.validate();
  return ds;
}

IVDataset read_dataset_csv_file(const std::string& path, int* reclosed, std::optional<double> pseudo_count) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open '" + path + "'");
  return read_dataset_csv(in, reclosed, pseudo_count);
}

void write_compositions_csv(std::ostream& out, const Matrix& x) {
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << "x_" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << x(i, j);
    out << '\n';
  }
}

Vector binarize_at_mean(const Vector& y) {
  if (y.size() == 0) throw DegenerateInputError("no outcomes to binarize");
  const double mean = y.mean();
  return y.unaryExpr([mean](double v) { return v > mean ? 1.0 : -1.0; });
}

IVDataset ingest_counts(const CsvTable& table, const IngestOptions& options, std::vector<std::string>* taxa) {
  if (options.instrument_cols.empty()) throw DomainError("at least one instrument column is required");
  if (options.outcome_col.empty()) throw DomainError("an outcome column is required");
  std::vector<std::size_t> zc;
  for (const auto& name : options.instrument_cols) zc.push_back(table.column(name));
  const std::size_t yc = table.column(options.outcome_col);
  std::vector<std::size_t> xc;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    if (k == yc || std::find(zc.begin(), zc.end(), k) != zc.end()) continue;
    xc.push_back(k);
    names.push_back(table.header[k]);
  }
  if (xc.size() < 2) throw DimensionError("count table needs at least two taxa columns");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Matrix z(n, static_cast<Eigen::Index>(zc.size()));
  Matrix counts(n, static_cast<Eigen::Index>(xc.size()));
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = table.rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < zc.size(); ++k) z(i, static_cast<Eigen::Index>(k)) = r[zc[k]];
    for (std::size_t k = 0; k < xc.size(); ++k) counts(i, static_cast<Eigen::Index>(k)) = r[xc[k]];
    y[i] = r[yc];
  }
  if (options.binary) y = binarize_at_mean(y);
  if (taxa) *taxa = std::move(names);
  return IVDataset::from_counts(std::move(z), counts, std::move(y), options.pseudo_count);
}

Json spec_to_json(const SimulationSpec& spec) {
  Json j;
  j["setting"] = to_string(spec.setting);
  j["preset"] = spec.preset;
  j["p"] = spec.p;
  j["q"] = spec.q;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  Json params;
  if (spec.is_setting_a()) {
    const auto& a = spec.a;
    params["mu_c"] = a.mu_c;
    params["alpha0"] = vec(a.alpha0);
    params["alpha"] = mat(a.alpha);
    params["c_x"] = vec(a.c_x);
    params["beta0"] = a.beta0;
    params["beta_log"] = vec(a.beta_log);
    params["c_y"] = a.c_y;
  } else {
    const auto& b = spec.b;
    params["z_min"] = b.z_min;
    params["z_max"] = b.z_max;
    params["u_min"] = b.u_min;
    params["u_max"] = b.u_max;
    params["alpha0"] = vec(b.alpha0);
    params["alpha"] = mat(b.alpha);
    params["theta"] = b.theta;
    params["eta"] = vec(b.eta);
    params["omega_c"] = vec(b.omega_c);
    params["beta0"] = b.beta0;
    params["beta_log"] = vec(b.beta_log);
    params["c_y"] = vec(b.c_y);
    params["pseudo_count"] = b.pseudo_count;
  }
  j["params"] = std::move(params);
  return j;
}

SimulationSpec spec_from_json(const Json& j) {
  reject_unknown(j, {"setting", "preset", "p", "q", "n", "seed", "params"}, "scenario");
  SimulationSpec s;
  s.setting = parse_setting(get<std::string>(j, "setting", "scenario"));
  if (j.contains("preset")) s.preset = get<std::string>(j, "preset", "scenario");
  s.p = get<int>(j, "p", "scenario");
  s.q = get<int>(j, "q", "scenario");
  s.n = get<int>(j, "n", "scenario");
  s.seed = j.contains("seed") ? get<std::uint64_t>(j, "seed", "scenario") : 0;
  if (!j.contains("params")) throw DomainError("missing key 'params' in scenario");
  const Json& pj = j.at("params");
  if (s.is_setting_a()) {
    reject_unknown(pj, {"mu_c", "alpha0", "alpha", "c_x", "beta0", "beta_log", "c_y"}, "setting A params");
    const std::string w = "setting A params";
    s.a.mu_c = get<double>(pj, "mu_c", w);
    s.a.alpha0 = to_vector(pj.at("alpha0"), "alpha0");
    s.a.alpha = to_matrix(pj.at("alpha"), "alpha");
    s.a.c_x = to_vector(pj.at("c_x"), "c_x");
    s.a.beta0 = get<double>(pj, "beta0", w);
    s.a.beta_log = to_vector(pj.at("beta_log"), "beta_log");
    s.a.c_y = get<double>(pj, "c_y", w);
  } else {
    reject_unknown(pj,
                   {"z_min", "z_max", "u_min", "u_max", "alpha0", "alpha", "theta", "eta", "omega_c", "beta0",
                    "beta_log", "c_y", "pseudo_count"},
                   "setting B params");
    const std::string w = "setting B params";
    s.b.z_min = get<double>(pj, "z_min", w);
    s.b.z_max = get<double>(pj, "z_max", w);
    s.b.u_min = get<double>(pj, "u_min", w);
    s.b.u_max = get<double>(pj, "u_max", w);
    s.b.alpha0 = to_vector(pj.at("alpha0"), "alpha0");
    s.b.alpha = to_matrix(pj.at("alpha"), "alpha");
    s.b.theta = get<double>(pj, "theta", w);
    s.b.eta = to_vector(pj.at("eta"), "eta");
    s.b.omega_c = to_vector(pj.at("omega_c"), "omega_c");
    s.b.beta0 = get<double>(pj, "beta0", w);
    s.b.beta_log = to_vector(pj.at("beta_log"), "beta_log");
    s.b.c_y = to_vector(pj.at("c_y"), "c_y");
    if (pj.contains("pseudo_count")) s.b.pseudo_count = get<double>(pj, "pseudo_count", w);
  }
  s.validate();
  return s;
}

Json truth_to_json(const GroundTruth& truth) {
  Json j;
  j["beta_log"] = vec(truth.beta_log());
  j["beta0"] = truth.beta0();
  j["setting"] = to_string(truth.spec().setting);
  j["oracle_const"] = truth.oracle_const();
  j["oracle_se"] = truth.oracle_std_error();
  j["seed"] = truth.spec().seed;
  j["preset"] = truth.spec().preset;
  j["spec"] = spec_to_json(truth.spec());
  return j;
}

GroundTruth truth_from_json(const Json& j) {
  reject_unknown(j, {"beta_log", "beta0", "setting", "oracle_const", "oracle_se", "seed", "preset", "spec"},
                 "ground truth");
  if (!j.contains("spec")) throw DomainError("ground truth JSON lacks the scenario 'spec'");
  return GroundTruth(spec_from_json(j.at("spec")), get<double>(j, "oracle_const", "ground truth"));
}

Json fit_to_json(const CausalFit& fit) {
  Json j;
  j["method"] = to_string(fit.method);
  j["p"] = fit.p;
  j["q"] = fit.q;
  j["n"] = fit.n;
  if (fit.linear) {
    j["beta_log"] = vec(fit.linear->beta_log);
    j["beta_ilr"] = vec(fit.beta_ilr);
  }
  j["intercept"] = fit.intercept;
  if (fit.raw_coef.size() > 0) j["raw_coef"] = vec(fit.raw_coef);
  if (fit.diversity) {
    j["diversity"] = std::string(to_string(*fit.diversity));
    j["slope"] = fit.slope;
  }
  Json d;
  d["f_stats"] = vec(fit.diagnostics.f_stats);
  d["converged"] = fit.diagnostics.converged;
  d["flags"] = fit.diagnostics.flags;
  if (!fit.diagnostics.message.empty()) d["message"] = fit.diagnostics.message;
  if (fit.diagnostics.condition > 0.0) d["condition"] = fit.diagnostics.condition;
  if (fit.diagnostics.stability) {
    const auto& s = *fit.diagnostics.stability;
    Json meta;
    meta["threshold"] = s.threshold;
    meta["n_resamples"] = s.n_resamples;
    meta["region_length"] = s.region_length;
    meta["selected"] = s.selected;
    meta["selection_freq"] = vec(s.selection_freq);
    d["lambda_path_meta"] = std::move(meta);
  }
  if (fit.method == Method::kDirLc) {
    d["dirichlet"] = Json{{"iterations", fit.diagnostics.dirichlet_iterations},
                          {"lambda", fit.diagnostics.dirichlet_lambda}};
  }
  j["diagnostics"] = std::move(d);
  if (fit.kernel) {
    const auto& k = *fit.kernel;
    Json kj;
    kj["split_seed"] = k.split_seed;
    kj["bandwidths"] = Json{{"x", k.sigma_x}, {"z", k.sigma_z}};
    kj["ridge_params"] = Json{{"lambda", k.lambda}, {"xi", k.xi}};
    kj["y_offset"] = k.y_offset;
    kj["n_stage1"] = k.n_stage1;
    kj["n_stage2"] = k.n_stage2;
    kj["subsampled"] = k.subsampled;
    kj["dual_weights"] = vec(k.weights);
    kj["train_coords"] = mat(k.x_train);
    j["kernel"] = std::move(kj);
  }
  return j;
}

CausalFit fit_from_json(const Json& j) {
  reject_unknown(j,
                 {"method", "p", "q", "n", "beta_log", "beta_ilr", "intercept", "raw_coef", "diversity", "slope",
                  "diagnostics", "kernel"},
                 "fit");
  CausalFit fit;
  const std::string w = "fit";
  fit.method = parse_method(get<std::string>(j, "method", w));
  fit.p = get<Eigen::Index>(j, "p", w);
  fit.q = get<Eigen::Index>(j, "q", w);
  fit.n = get<Eigen::Index>(j, "n", w);
  fit.intercept = get<double>(j, "intercept", w);
  if (j.contains("beta_log")) {
    fit.linear = LinearFit{to_vector(j.at("beta_log"), "beta_log"), fit.intercept};
    if (fit.linear->beta_log.size() != fit.p) throw DimensionError("beta_log length does not match p");
    fit.beta_ilr = beta_log_to_ilr(fit.linear->beta_log, helmert_basis(fit.p));
  }
  if (j.contains("raw_coef")) fit.raw_coef = to_vector(j.at("raw_coef"), "raw_coef");
  if (j.contains("diversity")) {
    fit.diversity = parse_diversity_kind(get<std::string>(j, "diversity", w));
    fit.slope = get<double>(j, "slope", w);
  }
  if (j.contains("diagnostics")) {
    const Json& d = j.at("diagnostics");
    if (d.contains("f_stats")) fit.diagnostics.f_stats = to_vector(d.at("f_stats"), "f_stats");
    if (d.contains("converged")) fit.diagnostics.converged = get<bool>(d, "converged", "diagnostics");
    if (d.contains("flags")) fit.diagnostics.flags = get<std::vector<std::string>>(d, "flags", "diagnostics");
    if (d.contains("message")) fit.diagnostics.message = get<std::string>(d, "message", "diagnostics");
  }
  if (j.contains("kernel")) {
    const Json& kj = j.at("kernel");
    const std::string kw = "kernel";
    KernelFit k;
    k.split_seed = get<std::uint64_t>(kj, "split_seed", kw);
    k.sigma_x = get<double>(kj.at("bandwidths"), "x", kw);
    k.sigma_z = get<double>(kj.at("bandwidths"), "z", kw);
    k.lambda = get<double>(kj.at("ridge_params"), "lambda", kw);
    k.xi = get<double>(kj.at("ridge_params"), "xi", kw);
    k.y_offset = get<double>(kj, "y_offset", kw);
    k.n_stage1 = get<Eigen::Index>(kj, "n_stage1", kw);
    k.n_stage2 = get<Eigen::Index>(kj, "n_stage2", kw);
    k.subsampled = get<bool>(kj, "subsampled", kw);
    k.weights = to_vector(kj.at("dual_weights"), "dual_weights");
    k.x_train = to_matrix(kj.at("train_coords"), "train_coords");
    if (k.weights.size() != k.x_train.rows()) throw DimensionError("kernel weights do not match training rows");
    fit.kernel = std::move(k);
  }
  return fit;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError("invalid JSON in '" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write '" + path + "'");
  out << text;
}

}  // namespace compiv
