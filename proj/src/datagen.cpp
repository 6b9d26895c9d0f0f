#include "compiv/datagen.hpp"

#include "compiv/error.hpp"
#include "compiv/logratio.hpp"

#include <array>
#include <cmath>
#include <random>

namespace compiv {

std::string to_string(Setting setting) {
  switch (setting) {
    case Setting::kA: return "A";
    case Setting::kANonlinear: return "A-nonlinear";
    case Setting::kAWeak: return "A-weak";
    case Setting::kB: return "B";
  }
  return "A";
}

Setting parse_setting(const std::string& name) {
  if (name == "A") return Setting::kA;
  if (name == "A-nonlinear" || name == "A_nonlinear") return Setting::kANonlinear;
  if (name == "A-weak" || name == "A_weak") return Setting::kAWeak;
  if (name == "B") return Setting::kB;
  throw DomainError("unknown setting '" + name + "'");
}

namespace {

void require_size(const Vector& v, Eigen::Index size, const char* name) {
  if (v.size() != size) {
    throw DimensionError(std::string(name) + " has length " + std::to_string(v.size()) + ", expected " +
                         std::to_string(size));
  }
  if (!v.allFinite()) throw DomainError(std::string(name) + " contains non-finite values");
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(name) + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                         ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!m.allFinite()) throw DomainError(std::string(name) + " contains non-finite values");
}

Vector padded(std::initializer_list<double> head, Eigen::Index size) {
  Vector v = Vector::Zero(size);
  Eigen::Index k = 0;
  for (double x : head) {
    if (k >= size) break;
    v[k++] = x;
  }
  return v;
}

/// q×d loading matrix with 1 where instrument j and coordinate i differ and
/// both indices are at most 8 (1-based), zero elsewhere.
Matrix block_loading(Eigen::Index q, Eigen::Index d) {
  Matrix a = Matrix::Zero(q, d);
  for (Eigen::Index j = 0; j < q; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i != j && i < 8 && j < 8) a(j, i) = 1.0;
    }
  }
  return a;
}

template <std::size_t N>
double uniform_choice(const std::array<double, N>& values, Engine& engine) {
  std::uniform_int_distribution<std::size_t> pick(0, N - 1);
  return values[pick(engine)];
}

SimulationSpec setting_a_p3(Setting setting) {
  SimulationSpec s;
  s.setting = setting;
  s.p = 3;
  s.q = 2;
  s.n = 1000;
  const LogRatioBasis basis = helmert_basis(3);
  Matrix shown(2, 2);  // rows are ilr coordinates, columns instruments
  Vector beta(2);
  switch (setting) {
    case Setting::kAWeak:
      s.a.mu_c = -2.0;
      s.a.alpha0 = Vector{{4.0, 1.0}};
      shown << 0.15, 0.15, 0.2, 0.0;
      s.a.c_x = Vector{{1.0, 1.0}};
      s.a.beta0 = 2.0;
      beta << 6.0, 2.0;
      break;
    case Setting::kANonlinear:
      s.a.mu_c = -1.0;
      s.a.alpha0 = Vector{{1.0, 1.0}};
      shown << 4.0, 1.0, -1.0, 3.0;
      s.a.c_x = Vector{{2.0, 2.0}};
      s.a.beta0 = 0.5;
      beta << 6.0, 2.0;
      break;
    default:
      s.a.mu_c = -3.0;
      s.a.alpha0 = Vector{{1.0, 1.0}};
      shown << 0.5, -0.15, 0.3, 0.7;
      s.a.c_x = Vector{{0.5, 0.5}};
      s.a.beta0 = 0.5;
      beta << 4.0, 1.0;
      break;
  }
  s.a.alpha = shown.transpose();
  s.a.beta_log = beta_ilr_to_log(beta, basis);
  s.a.c_y = 4.0;
  return s;
}

SimulationSpec setting_a_high(int p) {
  SimulationSpec s;
  s.setting = Setting::kA;
  s.p = p;
  s.q = 10;
  s.n = 10000;
  const Eigen::Index d = p - 1;
  if (p == 30) {
    s.a.mu_c = 5.0;
    s.a.alpha0 = padded({3, 1, 1, 1, 3, 1, 1, 1}, d);
    s.a.c_x = padded({-2, -1, -1, -1, 2, 1, 1, 1}, d);
  } else {
    s.a.mu_c = 3.0;
    s.a.alpha0 = padded({1, 1, 3, 1, 1, 1, 3, 1, 1, 1, 3, 1}, d);
    s.a.c_x = padded({-1, 2, -1, 2, -1, 2, -2, 1, -2, 1, -2, 1}, d);
  }
  s.a.alpha = block_loading(s.q, d);
  s.a.beta0 = 5.0;
  s.a.beta_log = padded({10, 5, 5, 5, -10, -5, -5, -5}, p);
  s.a.c_y = 5.0;
  return s;
}

SimulationSpec setting_b_p3() {
  SimulationSpec s;
  s.setting = Setting::kB;
  s.p = 3;
  s.q = 2;
  s.n = 1000;
  s.b.z_min = 0.0;
  s.b.z_max = 10.0;
  s.b.alpha0 = Vector{{7.0, 9.0, 8.0}};
  s.b.alpha = Matrix::Zero(2, 3);
  s.b.alpha(0, 0) = 5.0;
  s.b.alpha(1, 1) = 5.0;
  s.b.theta = 2.0;
  s.b.eta = Vector::Zero(3);
  s.b.omega_c = Vector{{0.7, 0.1, 0.2}};
  s.b.beta0 = 1.0;
  s.b.beta_log = Vector{{-5.0, 3.0, 2.0}};
  s.b.c_y = Vector{{2.0, -10.0, -10.0}};
  return s;
}

SimulationSpec setting_b_high(int p, std::uint64_t seed) {
  SimulationSpec s;
  s.setting = Setting::kB;
  s.p = p;
  s.q = 10;
  s.n = 10000;
  s.b.z_min = 0.0;
  s.b.z_max = 10.0;
  Engine engine = make_engine(seed, "scenario-params");
  s.b.alpha0 = padded({1, 1, 2, 1, 4, 4, 2, 1, 4, 4, 2, 1}, p);
  for (Eigen::Index j = 12; j < p; ++j) s.b.alpha0[j] = uniform_choice(std::array{1.0, 2.0, 2.0}, engine);
  s.b.alpha = block_loading(s.q, p);
  s.b.theta = 2.0;
  s.b.eta = Vector::Constant(p, 0.8);
  s.b.eta.head(12).setZero();
  Vector omega = padded({0.2, 0.3, 0.2, 0.1}, p);
  for (Eigen::Index j = 4; j < p; ++j) omega[j] = uniform_choice(std::array{0.01, 0.05}, engine);
  s.b.omega_c = omega / omega.sum();
  s.b.beta0 = 1.0;
  s.b.beta_log = padded({-10, -5, -5, -5, 10, 5, 5, 5}, p);
  s.b.c_y = padded({10, 10, 5, 15, -5, -5, -5, -5, -5, -5, -5, -5}, p);
  return s;
}

/// Setting-B-style scenario with one instrument whose effect on the rare
/// species raises evenness while it also feeds the dominant species, and a
/// confounder loaded on the dominant species. Shannon and Simpson then move
/// in opposite directions with the instrument.
SimulationSpec diversity_scenario() {
  constexpr int p = 10;
  SimulationSpec s;
  s.setting = Setting::kB;
  s.p = p;
  s.q = 1;
  s.n = 1000;
  s.b.z_min = 0.0;
  s.b.z_max = 1.0;
  s.b.alpha0 = Vector::Ones(p);
  s.b.alpha0.head(2).setConstant(100.0);
  s.b.alpha = Matrix::Constant(1, p, 30.0);
  s.b.alpha(0, 0) = 300.0;
  s.b.alpha(0, 1) = -90.0;
  s.b.theta = 20.0;
  s.b.eta = Vector::Zero(p);
  Vector omega = Vector::Ones(p);
  omega[0] = 1.5;
  s.b.omega_c = omega / omega.sum();
  s.b.beta0 = 1.0;
  s.b.beta_log = padded({1, -1}, p);
  s.b.c_y = padded({5, -5}, p);
  return s;
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi, Engine& engine) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = unif(engine);
  }
  return m;
}

/// log(U ⊙ Ω_C) = U log Ω_C - log Σⱼ Ω_Cⱼ^U.
Vector log_powered(const Vector& log_omega, double u) {
  const Vector scaled = u * log_omega;
  const double mx = scaled.maxCoeff();
  const double lse = mx + std::log((scaled.array() - mx).exp().sum());
  return (scaled.array() - lse).matrix();
}

struct Treatments {
  Matrix z;
  Vector u;
  Matrix x;
  Matrix counts;
  bool pseudo_counted = false;
};

Treatments draw_treatments(const SimulationSpec& spec, int n, Engine& engine) {
  Treatments t;
  const Eigen::Index p = spec.p;
  if (spec.is_setting_a()) {
    const auto& a = spec.a;
    t.z = uniform_matrix(n, spec.q, 0.0, 1.0, engine);
    std::normal_distribution<double> normal(a.mu_c, 1.0);
    t.u.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) t.u[i] = normal(engine);
    Matrix coords = t.z * a.alpha;
    coords.rowwise() += a.alpha0.transpose();
    coords += t.u * a.c_x.transpose();
    t.x = ilr_inv_rows(coords, helmert_basis(p));
    return t;
  }
  const auto& b = spec.b;
  t.z = uniform_matrix(n, spec.q, b.z_min, b.z_max, engine);
  std::uniform_real_distribution<double> unif(b.u_min, b.u_max);
  t.u.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) t.u[i] = unif(engine);
  const Matrix mu = (t.z * b.alpha).rowwise() + b.alpha0.transpose();
  t.counts.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    t.counts.row(i) = sample_zinb(mu.row(i).transpose(), b.theta, b.eta, engine).transpose();
  }
  const Matrix closed = close_counts(t.counts, b.pseudo_count, &t.pseudo_counted);
  const Vector log_omega = b.omega_c.array().log().matrix();
  Matrix log_x = log_rows(closed);
  for (Eigen::Index i = 0; i < n; ++i) log_x.row(i) += log_powered(log_omega, t.u[i]).transpose();
  Matrix x = log_x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = log_x.row(i).maxCoeff();
    x.row(i) = (log_x.row(i).array() - mx).exp();
    x.row(i) /= x.row(i).sum();
  }
  t.x = std::move(x);
  return t;
}

}  // namespace

void SimulationSpec::validate() const {
  if (p < 2) throw DomainError("p must be at least 2");
  if (q < 1) throw DomainError("q must be at least 1");
  if (n < 2) throw DomainError("n must be at least 2");
  if (is_setting_a()) {
    require_size(a.alpha0, p - 1, "alpha0");
    require_shape(a.alpha, q, p - 1, "alpha");
    require_size(a.c_x, p - 1, "c_x");
    require_size(a.beta_log, p, "beta_log");
    if (!std::isfinite(a.mu_c) || !std::isfinite(a.beta0) || !std::isfinite(a.c_y)) {
      throw DomainError("setting A scalars must be finite");
    }
    if (std::abs(a.beta_log.sum()) > 1e-10) throw DomainError("beta_log must sum to zero");
    return;
  }
  if (!(b.z_min < b.z_max)) throw DomainError("z_min must be below z_max");
  if (!(b.u_min < b.u_max)) throw DomainError("u_min must be below u_max");
  require_size(b.alpha0, p, "alpha0");
  require_shape(b.alpha, q, p, "alpha");
  require_size(b.eta, p, "eta");
  require_size(b.omega_c, p, "omega_c");
  require_size(b.beta_log, p, "beta_log");
  require_size(b.c_y, p, "c_y");
  if (!(b.theta > 0.0) || !std::isfinite(b.theta)) throw DomainError("theta must be positive");
  if (!(b.pseudo_count > 0.0)) throw DomainError("pseudo-count must be positive");
  if ((b.eta.array() < 0.0).any() || (b.eta.array() >= 1.0).any()) throw DomainError("eta entries must lie in [0, 1)");
  if ((b.omega_c.array() <= 0.0).any() || std::abs(b.omega_c.sum() - 1.0) > kSumTolerance) {
    throw DomainError("omega_c must be a strictly positive composition");
  }
  if (std::abs(b.beta_log.sum()) > 1e-10) throw DomainError("beta_log must sum to zero");
  for (Eigen::Index j = 0; j < p; ++j) {
    double lowest = b.alpha0[j];
    for (Eigen::Index k = 0; k < q; ++k) lowest += std::min(b.alpha(k, j) * b.z_min, b.alpha(k, j) * b.z_max);
    if (!(lowest > 0.0)) {
      throw DomainError("negative binomial mean of part " + std::to_string(j + 1) + " can reach " +
                        std::to_string(lowest) + " on the instrument range");
    }
  }
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"A-p3",  "A-p30", "A-p250", "A-weak",   "A-nonlinear",
                                              "B-p3",  "B-p30", "B-p250", "diversity"};
  return names;
}

SimulationSpec make_preset(const std::string& name, std::uint64_t seed, int n) {
  SimulationSpec s;
  if (name == "A-p3") {
    s = setting_a_p3(Setting::kA);
  } else if (name == "A-weak") {
    s = setting_a_p3(Setting::kAWeak);
  } else if (name == "A-nonlinear") {
    s = setting_a_p3(Setting::kANonlinear);
  } else if (name == "A-p30") {
    s = setting_a_high(30);
  } else if (name == "A-p250") {
    s = setting_a_high(250);
  } else if (name == "B-p3") {
    s = setting_b_p3();
  } else if (name == "B-p30") {
    s = setting_b_high(30, seed);
  } else if (name == "B-p250") {
    s = setting_b_high(250, seed);
  } else if (name == "diversity") {
    s = diversity_scenario();
  } else {
    throw DomainError("unknown preset '" + name + "'");
  }
  s.preset = name;
  s.seed = seed;
  if (n != 0) s.n = n;
  s.validate();
  return s;
}

Vector sample_zinb(const Vector& mu, double theta, const Vector& eta, Engine& engine) {
  if (mu.size() != eta.size()) throw DimensionError("mu and eta have different lengths");
  if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("theta must be positive");
  Vector out(mu.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    if (!(mu[j] > 0.0) || !std::isfinite(mu[j])) throw DomainError("negative binomial mean must be positive");
    if (!(eta[j] >= 0.0 && eta[j] < 1.0)) throw DomainError("zero-inflation probability must lie in [0, 1)");
    if (eta[j] > 0.0 && unif(engine) < eta[j]) {
      out[j] = 0.0;
      continue;
    }
    std::gamma_distribution<double> gamma(theta, mu[j] / theta);
    const double rate = gamma(engine);
    out[j] = rate > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(rate)(engine)) : 0.0;
  }
  return out;
}

std::pair<double, double> setting_b_oracle(const SettingBParams& b, std::uint64_t seed, int draws) {
  if (draws < 2) throw DomainError("oracle needs at least two draws");
  Engine engine = make_engine(seed, "oracle");
  std::uniform_real_distribution<double> unif(b.u_min, b.u_max);
  const Vector log_omega = b.omega_c.array().log().matrix();
  double mean = 0.0;
  double m2 = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double v = b.c_y.dot(log_powered(log_omega, unif(engine)));
    const double delta = v - mean;
    mean += delta / (k + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / (draws - 1);
  return {mean, std::sqrt(var / draws)};
}

GroundTruth::GroundTruth(SimulationSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const LogRatioBasis basis = helmert_basis(spec_.p);
  if (spec_.is_setting_a()) {
    beta_log_ = spec_.a.beta_log;
    beta0_ = spec_.a.beta0;
    oracle_const_ = spec_.a.c_y * spec_.a.mu_c;
  } else {
    beta_log_ = spec_.b.beta_log;
    beta0_ = spec_.b.beta0;
    std::tie(oracle_const_, oracle_se_) = setting_b_oracle(spec_.b, spec_.seed);
  }
  beta_ilr_ = beta_log_to_ilr(beta_log_, basis);
}

GroundTruth::GroundTruth(SimulationSpec spec, double oracle_const) : spec_(std::move(spec)) {
  spec_.validate();
  beta_log_ = spec_.is_setting_a() ? spec_.a.beta_log : spec_.b.beta_log;
  beta0_ = spec_.is_setting_a() ? spec_.a.beta0 : spec_.b.beta0;
  beta_ilr_ = beta_log_to_ilr(beta_log_, helmert_basis(spec_.p));
  oracle_const_ = oracle_const;
}

Vector GroundTruth::true_effect_rows(const Matrix& x) const {
  if (x.cols() != spec_.p) throw DimensionError("composition length does not match the scenario");
  require_positive_compositions(x);
  const Matrix log_x = log_rows(x);
  if (spec_.setting != Setting::kANonlinear) {
    return ((log_x * beta_log_).array() + beta0_ + oracle_const_).matrix();
  }
  const Matrix coords = ilr_rows(x, helmert_basis(spec_.p));
  const Vector cubic = (coords.array() + 1.0).cube().rowwise().sum();
  return ((coords * beta_ilr_).array() / 10.0 + cubic.array() / 20.0 + beta0_ + oracle_const_).matrix();
}

double GroundTruth::true_effect(const Composition& x) const {
  Matrix row(1, x.size());
  row.row(0) = x.parts().transpose();
  return true_effect_rows(row)[0];
}

Simulation generate(const SimulationSpec& spec) {
  spec.validate();
  Engine engine = make_engine(spec.seed, "train");
  Treatments t = draw_treatments(spec, spec.n, engine);
  Vector y(spec.n);
  if (spec.is_setting_a()) {
    const auto& a = spec.a;
    const Matrix coords = ilr_rows(t.x, helmert_basis(spec.p));
    const Vector beta = beta_log_to_ilr(a.beta_log, helmert_basis(spec.p));
    if (spec.setting == Setting::kANonlinear) {
      const Vector cubic = (coords.array() + 1.0).cube().rowwise().sum();
      y = ((coords * beta).array() / 10.0 + cubic.array() / 20.0 + a.beta0 + a.c_y * t.u.array()).matrix();
    } else {
      y = ((coords * beta).array() + a.beta0 + a.c_y * t.u.array()).matrix();
    }
  } else {
    const auto& b = spec.b;
    const Matrix log_x = log_rows(t.x);
    const Vector log_omega = b.omega_c.array().log().matrix();
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      y[i] = b.beta0 + b.beta_log.dot(log_x.row(i)) + b.c_y.dot(log_powered(log_omega, t.u[i]));
    }
  }
  IVDataset data;
  data.z = std::move(t.z);
  data.x = std::move(t.x);
  data.y = std::move(y);
  data.pseudo_counted = t.pseudo_counted;
  data.validate();
  return Simulation{std::move(data), GroundTruth(spec), std::move(t.counts), std::move(t.u)};
}

Matrix interventional_sample(const SimulationSpec& spec, int m, std::optional<std::uint64_t> seed) {
  spec.validate();
  if (m < 1) throw DomainError("interventional sample size must be positive");
  Engine engine = make_engine(seed.value_or(spec.seed), "intervention");
  return draw_treatments(spec, m, engine).x;
}

}  // namespace compiv
