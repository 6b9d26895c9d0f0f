#pragma once

#include "compiv/error.hpp"
#include "compiv/simplex.hpp"

#include <vector>

namespace compiv {

/// Dirichlet regression with log link: α_j(z) = exp(ω₀ⱼ + ωⱼᵀz).
struct DirichletGLM {
  Vector omega0;  ///< p
  Matrix omega;   ///< q×p, column j is ωⱼ
  double lambda = 0.0;

  /// n×p concentration parameters.
  Matrix alpha(const Matrix& z) const;
  Composition predict_mean(const Vector& z) const;
  /// Row i is α(z_i) / Σⱼ αⱼ(z_i).
  Matrix predict_mean_rows(const Matrix& z) const;
  /// Number of non-zero parameters.
  int degrees_of_freedom() const;
};

/// Σᵢ [log Γ(Σⱼ αᵢⱼ) - Σⱼ log Γ(αᵢⱼ) + Σⱼ (αᵢⱼ - 1) log xᵢⱼ].
double dirichlet_log_likelihood(const DirichletGLM& model, const Matrix& z, const Matrix& x);

/// Intercept-only maximum likelihood by Minka's fixed-point iteration.
Vector dirichlet_mle(const Matrix& x, int max_iterations = 1000, double tolerance = 1e-10);

/// Moment-matching estimate of a single Dirichlet from the first part's
/// mean and second moment.
Vector dirichlet_moments(const Matrix& x);

struct DirichletOptions {
  std::vector<double> lambda_grid{0.1, 1.0, 2.0, 5.0, 10.0};
  int max_iterations = 3000;
  double tolerance = 1e-10;  ///< relative change of the penalized objective
  /// Rows with every |z| below this radius initialize the intercepts.
  double init_radius = 0.2;
  bool record_trace = false;
};

struct DirichletDiagnostics {
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;  ///< (ℓ - λ Σⱼ ‖ωⱼ‖₁) / n
  double log_likelihood = 0.0;
  double bic = 0.0;
  bool init_from_subset = false;
  std::vector<double> objective_trace;
  /// BIC per grid value, in grid order (fit_dirichlet_glm only).
  std::vector<double> grid_bic;
};

class DirichletConvergenceError : public ConvergenceError {
 public:
  DirichletConvergenceError(const std::string& what, DirichletGLM best, DirichletDiagnostics diagnostics)
      : ConvergenceError(what), best_(std::move(best)), diagnostics_(std::move(diagnostics)) {}
  const DirichletGLM& best() const noexcept { return best_; }
  const DirichletDiagnostics& diagnostics() const noexcept { return diagnostics_; }

 private:
  DirichletGLM best_;
  DirichletDiagnostics diagnostics_;
};

/// Maximizes ℓ(ω) - λ Σⱼ ‖ωⱼ‖₁ (scaled by 1/n) by accelerated proximal gradient ascent
/// with backtracking; the intercepts ω₀ are not penalized. Throws
/// DirichletConvergenceError with the best iterate when max_iterations runs
/// out.
DirichletGLM fit_dirichlet_glm_at(const Matrix& z, const Matrix& x, double lambda,
                                  const DirichletOptions& options = {},
                                  DirichletDiagnostics* diagnostics = nullptr);

/// Fits every grid value and keeps the one with minimal
/// BIC = k log n - 2 ℓ, k the number of non-zero parameters.
DirichletGLM fit_dirichlet_glm(const Matrix& z, const Matrix& x, const DirichletOptions& options = {},
                               DirichletDiagnostics* diagnostics = nullptr);

}  // namespace compiv
