#include "compiv/constrained_lasso.hpp"

#include "compiv/error.hpp"
#include "compiv/logratio.hpp"
#include "compiv/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace compiv {

LossSpec LossSpec::huber(double delta) {
  if (!(delta > 0.0)) throw DomainError("huber loss needs delta > 0");
  return {LossKind::kHuber, delta};
}

LossSpec LossSpec::huberized_hinge(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("huberized hinge loss needs delta in (0, 1)");
  return {LossKind::kHuberizedHinge, delta};
}

double LossSpec::value(double y, double m) const {
  switch (kind) {
    case LossKind::kSquared: {
      const double r = y - m;
      return r * r;
    }
    case LossKind::kHuber: {
      const double r = std::abs(y - m);
      return r < delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
    }
    case LossKind::kSquaredHinge: {
      const double u = y * m;
      return u <= 1.0 ? (1.0 - u) * (1.0 - u) : 0.0;
    }
    case LossKind::kHuberizedHinge: {
      const double u = y * m;
      if (u > 1.0) return 0.0;
      if (u >= delta) return (1.0 - u) * (1.0 - u);
      return (1.0 - delta) * (1.0 + delta - 2.0 * u);
    }
  }
  return 0.0;
}

double LossSpec::derivative(double y, double m) const {
  switch (kind) {
    case LossKind::kSquared:
      return -2.0 * (y - m);
    case LossKind::kHuber: {
      const double r = y - m;
      if (std::abs(r) < delta) return -r;
      return r > 0.0 ? -delta : delta;
    }
    case LossKind::kSquaredHinge: {
      const double u = y * m;
      return u <= 1.0 ? -2.0 * y * (1.0 - u) : 0.0;
    }
    case LossKind::kHuberizedHinge: {
      const double u = y * m;
      if (u > 1.0) return 0.0;
      if (u >= delta) return -2.0 * y * (1.0 - u);
      return -2.0 * y * (1.0 - delta);
    }
  }
  return 0.0;
}

double LossSpec::curvature_bound() const { return kind == LossKind::kHuber ? 1.0 : 2.0; }

std::string LossSpec::name() const {
  switch (kind) {
    case LossKind::kSquared: return "squared";
    case LossKind::kHuber: return "huber";
    case LossKind::kSquaredHinge: return "squared_hinge";
    case LossKind::kHuberizedHinge: return "huberized_hinge";
  }
  return "unknown";
}

LossSpec parse_loss(const std::string& given, double delta) {
  std::string name = given;
  std::replace(name.begin(), name.end(), '-', '_');
  if (name == "squared") return LossSpec::squared();
  if (name == "huber") return LossSpec::huber(delta);
  if (name == "squared_hinge") return LossSpec::squared_hinge();
  if (name == "huberized_hinge") return LossSpec::huberized_hinge(delta);
  throw DomainError("unknown loss '" + name + "'");
}

namespace {

void validate_inputs(const Matrix& x_log, const Vector& y, const LossSpec& loss) {
  if (x_log.rows() != y.size()) {
    throw DimensionError("design has " + std::to_string(x_log.rows()) + " rows but outcome has " +
                         std::to_string(y.size()));
  }
  if (x_log.rows() < 2) throw DegenerateInputError("constrained lasso needs n >= 2");
  if (x_log.cols() < 2) throw DimensionError("constrained lasso needs p >= 2");
  if (!x_log.allFinite()) throw DomainError("design contains non-finite values");
  if (!y.allFinite()) throw DomainError("outcome contains non-finite values");
  if (loss.is_classification()) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] != 1.0 && y[i] != -1.0) {
        throw DomainError("hinge losses need labels in {-1, +1}; found " + std::to_string(y[i]) + " at row " +
                          std::to_string(i));
      }
    }
  }
}

double soft(double a, double t) {
  if (a > t) return a - t;
  if (a < -t) return a + t;
  return 0.0;
}

// argmin_b ½‖b - v‖² + t‖b‖₁ s.t. Σb = 0, i.e. soft(v + μ, t) with μ the
// root of the non-decreasing piecewise-linear h(μ) = Σ soft(v_j + μ, t).
Vector sum_zero_soft_threshold(const Vector& v, double t) {
  if (t <= 0.0) return (v.array() - v.mean()).matrix();
  const Eigen::Index p = v.size();
  std::vector<double> breaks;
  breaks.reserve(static_cast<std::size_t>(2 * p));
  for (Eigen::Index j = 0; j < p; ++j) {
    breaks.push_back(-v[j] - t);
    breaks.push_back(-v[j] + t);
  }
  std::sort(breaks.begin(), breaks.end());
  auto h = [&](double mu) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) s += soft(v[j] + mu, t);
    return s;
  };
  // Largest breakpoint with h <= 0; h(breaks.front()) <= 0 <= h(breaks.back()).
  std::size_t lo = 0;
  std::size_t hi = breaks.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (h(breaks[mid]) <= 0.0) lo = mid; else hi = mid;
  }
  double mu = breaks[lo];
  const double h_lo = h(mu);
  if (h_lo < 0.0 && breaks[hi] > breaks[lo]) {
    // The active set is constant on (breaks[lo], breaks[hi]); solve exactly.
    const double mid = 0.5 * (breaks[lo] + breaks[hi]);
    double acc = 0.0;
    int active = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double a = v[j] + mid;
      if (a > t) { acc += v[j] - t; ++active; }
      else if (a < -t) { acc += v[j] + t; ++active; }
    }
    if (active > 0) mu = std::clamp(-acc / active, breaks[lo], breaks[hi]);
  } else if (h_lo < 0.0) {
    mu = breaks[hi];
  }
  Vector b(p);
  for (Eigen::Index j = 0; j < p; ++j) b[j] = soft(v[j] + mu, t);
  return b;
}

// Smooth part of the objective on the centered design. For squared loss the
// intercept is exactly ȳ and everything runs through the p×p Gram matrix.
class SmoothModel {
 public:
  SmoothModel(const Matrix& x_log, const Vector& y, const LossSpec& loss)
      : y_(y), loss_(loss), col_mean_(x_log.colwise().mean().transpose()), xc_(x_log.rowwise() - col_mean_.transpose()) {
    gram_ = xc_.transpose() * xc_;
    const double top = gram_.rows() > 0 ? Eigen::SelfAdjointEigenSolver<Matrix>(gram_, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff() : 0.0;
    squared_ = loss.kind == LossKind::kSquared;
    if (squared_) {
      y_mean_ = y.mean();
      const Vector yc = (y.array() - y_mean_).matrix();
      xty_ = xc_.transpose() * yc;
      yc_sq_ = yc.squaredNorm();
      lipschitz_ = 2.0 * std::max(top, 1e-300);
    } else {
      lipschitz_ = loss.curvature_bound() * std::max(top, static_cast<double>(y.size()));
    }
  }

  bool fixed_intercept() const noexcept { return squared_; }
  double lipschitz() const noexcept { return lipschitz_; }
  const Vector& col_mean() const noexcept { return col_mean_; }
  const Matrix& gram() const noexcept { return gram_; }
  const Vector& xty() const noexcept { return xty_; }
  double y_mean() const noexcept { return y_mean_; }
  Eigen::Index p() const noexcept { return xc_.cols(); }

  double value(double b0, const Vector& beta) const {
    if (squared_) {
      return std::max(0.0, beta.dot(gram_ * beta) - 2.0 * xty_.dot(beta) + yc_sq_);
    }
    const Vector m = (xc_ * beta).array() + b0;
    double s = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) s += loss_.value(y_[i], m[i]);
    return s;
  }

  void gradient(double b0, const Vector& beta, double& g0, Vector& g) const {
    if (squared_) {
      g0 = 0.0;
      g = 2.0 * (gram_ * beta - xty_);
      return;
    }
    const Vector m = (xc_ * beta).array() + b0;
    Vector d(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) d[i] = loss_.derivative(y_[i], m[i]);
    g0 = d.sum();
    g = xc_.transpose() * d;
  }

  /// Optimal intercept of the β = 0 model (in centered coordinates).
  double null_intercept() const {
    if (squared_) return y_mean_;
    auto dsum = [&](double b) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < y_.size(); ++i) s += loss_.derivative(y_[i], b);
      return s;
    };
    double lo = y_.minCoeff() - 1.0;
    double hi = y_.maxCoeff() + 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (dsum(mid) < 0.0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  const Vector& y_;
  LossSpec loss_;
  Vector col_mean_;
  Matrix xc_;
  Matrix gram_;
  Vector xty_;
  double y_mean_ = 0.0;
  double yc_sq_ = 0.0;
  double lipschitz_ = 1.0;
  bool squared_ = false;
};

double lambda_max_of(const SmoothModel& model) {
  double g0 = 0.0;
  Vector g;
  model.gradient(model.null_intercept(), Vector::Zero(model.p()), g0, g);
  return 0.5 * (g.maxCoeff() - g.minCoeff());
}

struct Iterate {
  double b0 = 0.0;
  Vector beta;
};

// Exact solve of the squared-loss problem on the support of `current` with
// its sign pattern fixed; β_S = Hγ with H an orthonormal sum-zero basis.
bool polish_squared(const SmoothModel& model, double lambda, Iterate& current, double& objective) {
  std::vector<int> support;
  for (Eigen::Index j = 0; j < current.beta.size(); ++j) {
    if (current.beta[j] != 0.0) support.push_back(static_cast<int>(j));
  }
  const auto k = static_cast<Eigen::Index>(support.size());
  if (k < 2) return false;
  Matrix g_ss(k, k);
  Vector rhs(k);
  Vector signs(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    signs[a] = current.beta[support[a]] > 0.0 ? 1.0 : -1.0;
    rhs[a] = model.xty()[support[a]] - 0.5 * lambda * signs[a];
    for (Eigen::Index b = 0; b < k; ++b) g_ss(a, b) = model.gram()(support[a], support[b]);
  }
  const Matrix h = helmert_basis(k).matrix();
  const Matrix reduced = h.transpose() * g_ss * h;
  Eigen::LDLT<Matrix> ldlt(reduced);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
  const Vector diag = ldlt.vectorD();
  if (diag.minCoeff() <= 1e-12 * std::max(1.0, diag.maxCoeff())) return false;
  const Vector gamma = ldlt.solve(h.transpose() * rhs);
  const Vector beta_s = h * gamma;
  if (!beta_s.allFinite()) return false;
  if (lambda > 0.0) {
    for (Eigen::Index a = 0; a < k; ++a) {
      if (beta_s[a] * signs[a] <= 0.0) return false;
    }
  }
  Vector candidate = Vector::Zero(current.beta.size());
  for (Eigen::Index a = 0; a < k; ++a) candidate[support[a]] = beta_s[a];
  const double value = model.value(current.b0, candidate) + lambda * candidate.lpNorm<1>();
  if (!(value <= objective)) return false;
  current.beta = std::move(candidate);
  objective = value;
  return true;
}

Iterate solve(const SmoothModel& model, double lambda, const SolverOptions& options, Iterate start,
              SolverDiagnostics* diagnostics) {
  const double lip = model.lipschitz();
  auto objective = [&](const Iterate& it) { return model.value(it.b0, it.beta) + lambda * it.beta.lpNorm<1>(); };
  auto prox_step = [&](const Iterate& at) {
    double g0 = 0.0;
    Vector g;
    model.gradient(at.b0, at.beta, g0, g);
    Iterate next;
    next.b0 = model.fixed_intercept() ? at.b0 : at.b0 - g0 / lip;
    next.beta = sum_zero_soft_threshold(at.beta - g / lip, lambda / lip);
    return next;
  };

  // Project the start onto the feasible set.
  start.beta.array() -= start.beta.mean();
  if (model.fixed_intercept()) start.b0 = model.y_mean();

  Iterate x = start;
  Iterate y = start;
  double fx = objective(x);
  double t = 1.0;
  const double scale_floor = 1e-12 * (1.0 + std::abs(fx));
  SolverDiagnostics diag;
  if (options.record_trace) diag.objective_trace.push_back(fx);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    diag.iterations = iter;
    Iterate z = prox_step(y);
    const double fz = objective(z);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (fz <= fx) {
      const double change = fx - fz;
      Iterate x_prev = std::move(x);
      x = std::move(z);
      fx = fz;
      if (options.record_trace) diag.objective_trace.push_back(fx);
      y.b0 = x.b0 + ((t - 1.0) / t_next) * (x.b0 - x_prev.b0);
      y.beta = x.beta + ((t - 1.0) / t_next) * (x.beta - x_prev.beta);
      t = t_next;
      if (change <= options.tolerance * std::max(std::abs(fx), scale_floor)) {
        diag.converged = true;
        break;
      }
    } else {
      // Momentum overshot: restart from the last accepted iterate. A plain
      // proximal step with step 1/L never increases the objective.
      if (options.record_trace) diag.objective_trace.push_back(fx);
      y = x;
      t = 1.0;
    }
  }
  if (options.polish && model.fixed_intercept()) {
    diag.polished = polish_squared(model, lambda, x, fx);
    if (diag.polished && options.record_trace) diag.objective_trace.push_back(fx);
  }
  diag.objective = fx;
  if (diagnostics) *diagnostics = std::move(diag);
  return x;
}

LinearFit to_original(const SmoothModel& model, const Iterate& it) {
  LinearFit fit;
  fit.beta_log = it.beta;
  fit.intercept = it.b0 - model.col_mean().dot(it.beta);
  return fit;
}

Iterate to_centered(const SmoothModel& model, const LinearFit& fit) {
  return {fit.intercept + model.col_mean().dot(fit.beta_log), fit.beta_log};
}

LinearFit fit_with_model(const SmoothModel& model, double lambda, const SolverOptions& options,
                         SolverDiagnostics* diagnostics, const LinearFit* warm_start, double lmax) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError("lambda must be a finite non-negative number");
  }
  if (lambda >= lmax) {
    Iterate zero{model.null_intercept(), Vector::Zero(model.p())};
    if (diagnostics) {
      *diagnostics = {};
      diagnostics->converged = true;
      diagnostics->objective = model.value(zero.b0, zero.beta);
      if (options.record_trace) diagnostics->objective_trace.push_back(diagnostics->objective);
    }
    return to_original(model, zero);
  }
  Iterate start = warm_start ? to_centered(model, *warm_start) : Iterate{model.null_intercept(), Vector::Zero(model.p())};
  return to_original(model, solve(model, lambda, options, std::move(start), diagnostics));
}

}  // namespace

double lasso_objective(const Matrix& x_log, const Vector& y, const LossSpec& loss, double lambda,
                       const LinearFit& fit) {
  const Vector m = (x_log * fit.beta_log).array() + fit.intercept;
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) s += loss.value(y[i], m[i]);
  return s + lambda * fit.beta_log.lpNorm<1>();
}

double lambda_max(const Matrix& x_log, const Vector& y, const LossSpec& loss) {
  validate_inputs(x_log, y, loss);
  return lambda_max_of(SmoothModel(x_log, y, loss));
}

LinearFit fit_constrained_lasso(const Matrix& x_log, const Vector& y, const LossSpec& loss, double lambda,
                                const SolverOptions& options, SolverDiagnostics* diagnostics,
                                const LinearFit* warm_start) {
  validate_inputs(x_log, y, loss);
  const SmoothModel model(x_log, y, loss);
  return fit_with_model(model, lambda, options, diagnostics, warm_start, lambda_max_of(model));
}

std::vector<double> default_lambda_grid(double lmax, int length, double min_ratio) {
  if (length < 1) throw DomainError("lambda grid needs at least one point");
  std::vector<double> grid(static_cast<std::size_t>(length));
  for (int k = 0; k < length; ++k) {
    const double frac = length == 1 ? 0.0 : static_cast<double>(k) / (length - 1);
    grid[static_cast<std::size_t>(k)] = lmax * std::pow(min_ratio, frac);
  }
  return grid;
}

namespace {

RegularizationPath path_with_model(const SmoothModel& model, const std::vector<double>& lambdas,
                                   const SolverOptions& options, double lmax) {
  RegularizationPath path;
  path.lambdas = lambdas;
  path.coefs.resize(static_cast<Eigen::Index>(lambdas.size()), model.p());
  path.intercepts.resize(static_cast<Eigen::Index>(lambdas.size()));
  LinearFit previous{Vector::Zero(model.p()), 0.0};
  bool have_previous = false;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    SolverDiagnostics diag;
    const LinearFit fit = fit_with_model(model, lambdas[k], options, &diag, have_previous ? &previous : nullptr, lmax);
    path.coefs.row(static_cast<Eigen::Index>(k)) = fit.beta_log.transpose();
    path.intercepts[static_cast<Eigen::Index>(k)] = fit.intercept;
    path.converged.push_back(diag.converged);
    previous = fit;
    have_previous = true;
  }
  return path;
}

}  // namespace

RegularizationPath fit_path(const Matrix& x_log, const Vector& y, const LossSpec& loss,
                            std::optional<std::vector<double>> lambdas, const SolverOptions& options) {
  validate_inputs(x_log, y, loss);
  const SmoothModel model(x_log, y, loss);
  const double lmax = lambda_max_of(model);
  std::vector<double> grid = lambdas ? std::move(*lambdas) : default_lambda_grid(lmax);
  if (!std::is_sorted(grid.begin(), grid.end(), std::greater<>())) {
    throw DomainError("lambda grid must be in descending order");
  }
  return path_with_model(model, grid, options, lmax);
}

LinearFit refit_on_support(const Matrix& x_log, const Vector& y, const LossSpec& loss,
                           const std::vector<int>& support) {
  validate_inputs(x_log, y, loss);
  const Eigen::Index p = x_log.cols();
  LinearFit fit{Vector::Zero(p), 0.0};
  if (support.size() < 2) {
    fit.intercept = SmoothModel(x_log, y, loss).null_intercept();
    return fit;
  }
  const auto k = static_cast<Eigen::Index>(support.size());
  Matrix xs(x_log.rows(), k);
  for (Eigen::Index a = 0; a < k; ++a) xs.col(a) = x_log.col(support[static_cast<std::size_t>(a)]);

  Vector beta_s;
  if (loss.kind == LossKind::kSquared) {
    const Vector mean = xs.colwise().mean().transpose();
    const Matrix xsc = xs.rowwise() - mean.transpose();
    const double y_mean = y.mean();
    const Matrix h = helmert_basis(k).matrix();
    const Matrix w = xsc * h;
    const Vector gamma = w.colPivHouseholderQr().solve((y.array() - y_mean).matrix());
    beta_s = h * gamma;
    fit.intercept = y_mean - mean.dot(beta_s);
  } else {
    SolverOptions options;
    const LinearFit sub = fit_constrained_lasso(xs, y, loss, 0.0, options);
    beta_s = sub.beta_log;
    fit.intercept = sub.intercept;
  }
  for (Eigen::Index a = 0; a < k; ++a) fit.beta_log[support[static_cast<std::size_t>(a)]] = beta_s[a];
  return fit;
}

StabilityResult stability_select(const Matrix& x_log, const Vector& y, const LossSpec& loss,
                                 const StabilityOptions& options) {
  validate_inputs(x_log, y, loss);
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw DomainError("stability threshold must lie in (0, 1)");
  }
  if (options.n_resamples < 10) throw DomainError("stability selection needs at least 10 resamples");
  const Eigen::Index n = x_log.rows();
  const Eigen::Index p = x_log.cols();
  const Eigen::Index half = n / 2;
  if (half < 2) throw DegenerateInputError("stability selection needs n >= 4");

  const std::vector<double> ratios = default_lambda_grid(1.0, options.path_length, options.lambda_min_ratio);
  const auto n_grid = static_cast<Eigen::Index>(ratios.size());
  // selected_count(k, j): resamples with β_j != 0 at grid point k.
  Eigen::MatrixXi selected_count = Eigen::MatrixXi::Zero(n_grid, p);
  Vector support_size = Vector::Zero(n_grid);

  std::vector<Eigen::Index> index(static_cast<std::size_t>(n));
  Matrix xs(half, p);
  Vector ys(half);
  SolverOptions solver;
  for (int b = 0; b < options.n_resamples; ++b) {
    Engine engine = make_engine(options.seed, static_cast<std::uint64_t>(b));
    std::iota(index.begin(), index.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < half; ++i) {
      std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
      std::swap(index[static_cast<std::size_t>(i)], index[static_cast<std::size_t>(pick(engine))]);
      xs.row(i) = x_log.row(index[static_cast<std::size_t>(i)]);
      ys[i] = y[index[static_cast<std::size_t>(i)]];
    }
    if (loss.is_classification() && (ys.array() == ys[0]).all()) {
      continue;  // single-class subsample carries no contrast information
    }
    const SmoothModel model(xs, ys, loss);
    const double lmax = lambda_max_of(model);
    std::vector<double> grid(ratios.size());
    for (std::size_t k = 0; k < ratios.size(); ++k) grid[k] = lmax * ratios[k];
    const RegularizationPath path = path_with_model(model, grid, solver, lmax);
    for (Eigen::Index k = 0; k < n_grid; ++k) {
      for (Eigen::Index j = 0; j < p; ++j) {
        if (path.coefs(k, j) != 0.0) {
          ++selected_count(k, j);
          support_size[k] += 1.0;
        }
      }
    }
  }

  StabilityResult result;
  StabilityProfile& profile = result.profile;
  profile.threshold = options.threshold;
  profile.n_resamples = options.n_resamples;
  profile.selection_freq = Vector::Zero(p);
  const double q = static_cast<double>(std::min<Eigen::Index>(options.max_average_support, p));
  for (Eigen::Index k = 0; k < n_grid; ++k) {
    if (support_size[k] / options.n_resamples > q) break;
    profile.region_length = static_cast<int>(k + 1);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double freq = static_cast<double>(selected_count(k, j)) / options.n_resamples;
      profile.selection_freq[j] = std::max(profile.selection_freq[j], freq);
    }
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    if (profile.selection_freq[j] >= options.threshold) profile.selected.push_back(static_cast<int>(j));
  }
  result.empty_selection = profile.selected.size() < 2;
  result.fit = refit_on_support(x_log, y, loss, result.empty_selection ? std::vector<int>{} : profile.selected);
  return result;
}

}  // namespace compiv
