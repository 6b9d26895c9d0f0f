#include "compiv/dirichlet.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace compiv {

namespace {

constexpr double kMaxLogAlpha = 300.0;

void check_inputs(const Matrix& z, const Matrix& x) {
  if (z.rows() != x.rows()) throw DimensionError("instrument and composition row counts differ");
  if (x.cols() < 2) throw DimensionError("Dirichlet regression needs p >= 2");
  if (x.rows() < 2) throw DegenerateInputError("Dirichlet regression needs n >= 2");
  if (!z.allFinite()) throw DomainError("instruments contain non-finite values");
  require_positive_compositions(x);
}

// Newton inversion of the digamma function, started as in Minka (2000).
double inverse_digamma(double y) {
  double x = y >= -2.22 ? std::exp(y) + 0.5 : -1.0 / (y - boost::math::digamma(1.0));
  for (int it = 0; it < 8; ++it) x -= (boost::math::digamma(x) - y) / boost::math::trigamma(x);
  return x;
}

struct Params {
  Vector omega0;
  Matrix omega;
};

class Likelihood {
 public:
  Likelihood(const Matrix& z, const Matrix& x) : z_(z), log_x_(x.array().log().matrix()) {}

  Eigen::Index n() const { return z_.rows(); }

  // Averaged log-likelihood; -inf when any α overflows.
  double value(const Params& th) const {
    const Matrix eta = (z_ * th.omega).rowwise() + th.omega0.transpose();
    if (!(eta.maxCoeff() < kMaxLogAlpha)) return -std::numeric_limits<double>::infinity();
    const Matrix a = eta.array().exp().matrix();
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double row = std::lgamma(a.row(i).sum());
      for (Eigen::Index j = 0; j < a.cols(); ++j) row += (a(i, j) - 1.0) * log_x_(i, j) - std::lgamma(a(i, j));
      s += row;
    }
    return s / static_cast<double>(n());
  }

  // Gradient of the averaged log-likelihood; returns the value too.
  double gradient(const Params& th, Params& g) const {
    const Matrix eta = (z_ * th.omega).rowwise() + th.omega0.transpose();
    if (!(eta.maxCoeff() < kMaxLogAlpha)) return -std::numeric_limits<double>::infinity();
    const Matrix a = eta.array().exp().matrix();
    Matrix d(a.rows(), a.cols());
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double total = a.row(i).sum();
      const double psi_total = boost::math::digamma(total);
      double row = std::lgamma(total);
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        row += (a(i, j) - 1.0) * log_x_(i, j) - std::lgamma(a(i, j));
        d(i, j) = a(i, j) * (psi_total - boost::math::digamma(a(i, j)) + log_x_(i, j));
      }
      s += row;
    }
    const double inv_n = 1.0 / static_cast<double>(n());
    g.omega0 = d.colwise().sum().transpose() * inv_n;
    g.omega = z_.transpose() * d * inv_n;
    return s * inv_n;
  }

 private:
  const Matrix& z_;
  Matrix log_x_;
};

double penalty(const Params& th, double lambda) { return lambda * th.omega.lpNorm<1>(); }

double soft(double a, double t) {
  if (a > t) return a - t;
  if (a < -t) return a + t;
  return 0.0;
}

double sq_dist(const Params& a, const Params& b) {
  return (a.omega0 - b.omega0).squaredNorm() + (a.omega - b.omega).squaredNorm();
}

DirichletGLM to_model(const Params& th, double lambda) { return {th.omega0, th.omega, lambda}; }

Params initial_params(const Matrix& z, const Matrix& x, const DirichletOptions& options, bool& from_subset) {
  const Eigen::Index p = x.cols();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if ((z.row(i).array().abs() < options.init_radius).all()) rows.push_back(i);
  }
  Vector alpha0;
  from_subset = static_cast<Eigen::Index>(rows.size()) >= p + 1;
  if (from_subset) {
    Matrix sub(static_cast<Eigen::Index>(rows.size()), p);
    for (std::size_t k = 0; k < rows.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
    alpha0 = dirichlet_mle(sub);
  } else {
    alpha0 = dirichlet_moments(x);
  }
  return {alpha0.array().log().matrix(), Matrix::Zero(z.cols(), p)};
}

}  // namespace

Matrix DirichletGLM::alpha(const Matrix& z) const {
  if (z.cols() != omega.rows()) throw DimensionError("instrument dimension does not match the model");
  return ((z * omega).rowwise() + omega0.transpose()).array().exp().matrix();
}

Composition DirichletGLM::predict_mean(const Vector& z) const {
  Matrix row(1, z.size());
  row.row(0) = z.transpose();
  return Composition(predict_mean_rows(row).row(0).transpose());
}

Matrix DirichletGLM::predict_mean_rows(const Matrix& z) const {
  if (z.cols() != omega.rows()) throw DimensionError("instrument dimension does not match the model");
  Matrix eta = (z * omega).rowwise() + omega0.transpose();
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const double top = eta.row(i).maxCoeff();
    eta.row(i) = (eta.row(i).array() - top).exp().max(std::numeric_limits<double>::min()).matrix();
    eta.row(i) /= eta.row(i).sum();
  }
  return eta;
}

int DirichletGLM::degrees_of_freedom() const {
  return static_cast<int>((omega0.array() != 0.0).count() + (omega.array() != 0.0).count());
}

double dirichlet_log_likelihood(const DirichletGLM& model, const Matrix& z, const Matrix& x) {
  check_inputs(z, x);
  const Likelihood lik(z, x);
  return lik.value({model.omega0, model.omega}) * static_cast<double>(z.rows());
}

Vector dirichlet_moments(const Matrix& x) {
  require_positive_compositions(x);
  const Vector mean = x.colwise().mean().transpose();
  const double m1 = mean[0];
  const double m2 = x.col(0).array().square().mean();
  double s = (m1 - m2) / (m2 - m1 * m1);
  if (!(s > 0.0) || !std::isfinite(s)) s = 1.0;
  return mean * s;
}

Vector dirichlet_mle(const Matrix& x, int max_iterations, double tolerance) {
  require_positive_compositions(x);
  const Vector mean_log = x.array().log().colwise().mean().transpose();
  Vector alpha = dirichlet_moments(x);
  for (int it = 0; it < max_iterations; ++it) {
    const double psi_total = boost::math::digamma(alpha.sum());
    Vector next(alpha.size());
    for (Eigen::Index j = 0; j < alpha.size(); ++j) next[j] = inverse_digamma(psi_total + mean_log[j]);
    const double change = (next - alpha).cwiseAbs().maxCoeff();
    alpha = next;
    if (change <= tolerance * (1.0 + alpha.cwiseAbs().maxCoeff())) break;
  }
  return alpha;
}

DirichletGLM fit_dirichlet_glm_at(const Matrix& z, const Matrix& x, double lambda, const DirichletOptions& options,
                                  DirichletDiagnostics* diagnostics) {
  check_inputs(z, x);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("Dirichlet penalty must be finite and >= 0");
  const Likelihood lik(z, x);
  // Works on the averaged likelihood, so the penalty is scaled by 1/n.
  const double lam = lambda / static_cast<double>(lik.n());
  DirichletDiagnostics diag;
  Params x_cur = initial_params(z, x, options, diag.init_from_subset);
  auto objective = [&](const Params& th) { return lik.value(th) - penalty(th, lam); };
  double f_cur = objective(x_cur);
  if (!std::isfinite(f_cur)) throw DomainError("Dirichlet initialization produced a non-finite likelihood");
  if (options.record_trace) diag.objective_trace.push_back(f_cur);

  Params y = x_cur;
  double t = 1.0;
  double step = 1.0;
  Params g;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    diag.iterations = iter;
    double f_y = lik.gradient(y, g);
    if (!std::isfinite(f_y)) {
      y = x_cur;
      t = 1.0;
      f_y = lik.gradient(y, g);
    }
    Params cand;
    double f_cand_smooth = -std::numeric_limits<double>::infinity();
    for (int bt = 0; bt < 60; ++bt) {
      cand.omega0 = y.omega0 + step * g.omega0;
      cand.omega = (y.omega + step * g.omega).unaryExpr([&](double v) { return soft(v, step * lam); });
      f_cand_smooth = lik.value(cand);
      const double lin = (cand.omega0 - y.omega0).dot(g.omega0) + ((cand.omega - y.omega).array() * g.omega.array()).sum();
      if (std::isfinite(f_cand_smooth) && f_cand_smooth >= f_y + lin - sq_dist(cand, y) / (2.0 * step)) break;
      step *= 0.5;
    }
    const double f_cand = f_cand_smooth - penalty(cand, lam);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (f_cand >= f_cur) {
      const double change = f_cand - f_cur;
      Params prev = std::move(x_cur);
      x_cur = std::move(cand);
      f_cur = f_cand;
      if (options.record_trace) diag.objective_trace.push_back(f_cur);
      const double mom = (t - 1.0) / t_next;
      y.omega0 = x_cur.omega0 + mom * (x_cur.omega0 - prev.omega0);
      y.omega = x_cur.omega + mom * (x_cur.omega - prev.omega);
      t = t_next;
      step = std::min(step * 1.25, 1e3);
      if (change <= options.tolerance * (1.0 + std::abs(f_cur))) {
        diag.converged = true;
        break;
      }
    } else {
      if (options.record_trace) diag.objective_trace.push_back(f_cur);
      y = x_cur;
      t = 1.0;
    }
  }
  diag.objective = f_cur;
  diag.log_likelihood = lik.value(x_cur) * static_cast<double>(lik.n());
  DirichletGLM model = to_model(x_cur, lambda);
  diag.bic = model.degrees_of_freedom() * std::log(static_cast<double>(lik.n())) - 2.0 * diag.log_likelihood;
  if (!diag.converged) {
    throw DirichletConvergenceError("Dirichlet regression did not converge in " +
                                        std::to_string(options.max_iterations) + " iterations (lambda " +
                                        std::to_string(lambda) + ")",
                                    std::move(model), std::move(diag));
  }
  if (diagnostics) *diagnostics = std::move(diag);
  return model;
}

DirichletGLM fit_dirichlet_glm(const Matrix& z, const Matrix& x, const DirichletOptions& options,
                               DirichletDiagnostics* diagnostics) {
  if (options.lambda_grid.empty()) throw DomainError("Dirichlet lambda grid is empty");
  DirichletGLM best;
  DirichletDiagnostics best_diag;
  std::vector<double> grid_bic;
  bool have = false;
  for (double lambda : options.lambda_grid) {
    DirichletGLM model;
    DirichletDiagnostics diag;
    try {
      model = fit_dirichlet_glm_at(z, x, lambda, options, &diag);
    } catch (const DirichletConvergenceError& e) {
      model = e.best();
      diag = e.diagnostics();
    }
    grid_bic.push_back(diag.bic);
    if (!have || diag.bic < best_diag.bic) {
      best = std::move(model);
      best_diag = std::move(diag);
      have = true;
    }
  }
  best_diag.grid_bic = std::move(grid_bic);
  if (!best_diag.converged) {
    throw DirichletConvergenceError("Dirichlet regression selected by BIC did not converge (lambda " +
                                        std::to_string(best.lambda) + ")",
                                    std::move(best), std::move(best_diag));
  }
  if (diagnostics) *diagnostics = std::move(best_diag);
  return best;
}

}  // namespace compiv
