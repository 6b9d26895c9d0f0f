#include "compiv/kiv.hpp"

#include "compiv/error.hpp"
#include "compiv/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace compiv {

Matrix gaussian_kernel(const Matrix& a, const Matrix& b, double sigma) {
  if (a.cols() != b.cols()) throw DimensionError("kernel inputs have different dimensions");
  if (!(sigma > 0.0)) throw DomainError("kernel bandwidth must be positive");
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix d = -2.0 * a * b.transpose();
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  const double scale = -1.0 / (2.0 * sigma * sigma);
  return (d.array().max(0.0) * scale).exp().matrix();
}

double median_heuristic(const Matrix& rows, Eigen::Index max_rows) {
  const Eigen::Index n = std::min(rows.rows(), max_rows);
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((rows.row(i) - rows.row(j)).norm());
  }
  if (dist.empty()) return 1.0;
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  return *mid > 0.0 ? *mid : 1.0;
}

std::vector<double> default_ridge_grid() {
  std::vector<double> grid(10);
  for (int k = 0; k < 10; ++k) grid[static_cast<std::size_t>(k)] = std::pow(10.0, -6.0 + 6.0 * k / 9.0);
  return grid;
}

double KernelFit::predict(const Vector& x) const {
  Matrix row(1, x.size());
  row.row(0) = x.transpose();
  return predict_rows(row)[0];
}

Vector KernelFit::predict_rows(const Matrix& x) const {
  if (x.cols() != x_train.cols()) throw DimensionError("treatment dimension does not match the kernel fit");
  return (gaussian_kernel(x, x_train, sigma_x) * weights).array() + y_offset;
}

namespace {

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(idx[k]);
  return out;
}

Vector take(const Vector& v, const std::vector<Eigen::Index>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[idx[k]];
  return out;
}

Vector solve_psd(Matrix a, const Vector& b) {
  const double jitter = 1e-12 * std::max(1e-300, a.diagonal().mean());
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
      Vector x = llt.solve(b);
      if (x.allFinite()) return x;
    }
    a.diagonal().array() += jitter * std::pow(100.0, attempt);
  }
  throw RankDeficientError("regularized kernel system is not positive definite");
}

void check_grid(const std::vector<double>& grid, const char* name) {
  if (grid.empty()) throw DomainError(std::string(name) + " grid is empty");
  for (double v : grid) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " values must be positive");
  }
}

}  // namespace

KernelFit fit_kiv(const Matrix& z, const Matrix& x, const Vector& y, const KivOptions& options) {
  if (z.rows() != x.rows() || y.size() != x.rows()) throw DimensionError("KIV inputs have different lengths");
  if (!z.allFinite() || !x.allFinite() || !y.allFinite()) throw DomainError("KIV inputs contain non-finite values");
  if (!(options.stage1_fraction > 0.0 && options.stage1_fraction < 1.0)) {
    throw DomainError("stage-1 fraction must lie in (0, 1)");
  }
  if (options.lambda && !(*options.lambda > 0.0)) throw DomainError("KIV lambda must be positive");
  if (options.xi && !(*options.xi > 0.0)) throw DomainError("KIV xi must be positive");
  if (!options.lambda) check_grid(options.lambda_grid, "lambda");
  if (!options.xi) check_grid(options.xi_grid, "xi");

  KernelFit fit;
  fit.split_seed = options.split_seed;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Engine engine = make_engine(options.split_seed, "kiv-split");
  std::shuffle(order.begin(), order.end(), engine);
  if (static_cast<Eigen::Index>(order.size()) > options.max_samples) {
    order.resize(static_cast<std::size_t>(options.max_samples));
    fit.subsampled = true;
  }
  const auto total = static_cast<Eigen::Index>(order.size());
  const auto n = static_cast<Eigen::Index>(std::floor(options.stage1_fraction * static_cast<double>(total)));
  const Eigen::Index m = total - n;
  if (n < 2 || m < 2) throw DegenerateInputError("KIV needs at least two samples in each stage");
  const std::vector<Eigen::Index> idx1(order.begin(), order.begin() + n);
  const std::vector<Eigen::Index> idx2(order.begin() + n, order.end());

  const Matrix x1 = take_rows(x, idx1);
  const Matrix z1 = take_rows(z, idx1);
  const Matrix x2 = take_rows(x, idx2);
  const Matrix z2 = take_rows(z, idx2);
  const Vector y1 = take(y, idx1);
  const Vector y2 = take(y, idx2);
  fit.y_offset = y2.mean();
  const Vector y1c = (y1.array() - fit.y_offset).matrix();
  const Vector y2c = (y2.array() - fit.y_offset).matrix();

  fit.sigma_x = median_heuristic(x1);
  fit.sigma_z = median_heuristic(z1);
  const Matrix kxx = gaussian_kernel(x1, x1, fit.sigma_x);
  const Matrix kzz = gaussian_kernel(z1, z1, fit.sigma_z);
  const Matrix kzz2 = gaussian_kernel(z1, z2, fit.sigma_z);

  // K_ZZ = U S Uᵀ turns every (K_ZZ + nλI)⁻¹ into a diagonal rescaling.
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(kzz);
  const Matrix& u = eig.eigenvectors();
  const Vector s = eig.eigenvalues().cwiseMax(0.0);
  const Matrix b = u.transpose() * kzz2;  // n×m
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);

  if (options.lambda) {
    fit.lambda = *options.lambda;
  } else {
    // Stage-1 error: mean over stage-2 pairs of ‖φ(x̃) - μ̂(z̃)‖² in the RKHS,
    // 1 - 2 K_Xx̃ᵀγ + γᵀK_XXγ with γ = (K_ZZ + nλI)⁻¹ K_Zz̃.
    const Matrix c = u.transpose() * kxx * u;
    const Matrix e = u.transpose() * gaussian_kernel(x1, x2, fit.sigma_x);
    const Matrix g = b * b.transpose();
    const Vector cross = (e.array() * b.array()).rowwise().sum();
    const Matrix cg = (c.array() * g.array()).matrix();
    double best = std::numeric_limits<double>::infinity();
    for (double lam : options.lambda_grid) {
      const Vector d = (s.array() + dn * lam).inverse().matrix();
      const double err = 1.0 - 2.0 * d.dot(cross) / dm + d.dot(cg * d) / dm;
      if (err < best) {
        best = err;
        fit.lambda = lam;
      }
    }
  }

  const Vector d = (s.array() + dn * fit.lambda).inverse().matrix();
  const Matrix w = kxx * (u * (d.asDiagonal() * b));  // n×m
  const Matrix wwt = w * w.transpose();
  const Vector wy = w * y2c;

  auto weights_for = [&](double xi) {
    Matrix a = wwt + dm * xi * kxx;
    return solve_psd(std::move(a), wy);
  };

  if (options.xi) {
    fit.xi = *options.xi;
    fit.weights = weights_for(fit.xi);
  } else {
    // Stage-2 error on stage-1 outcomes, predicting through the stage-1
    // embeddings μ̂(z_i) = K_XX (K_ZZ + nλI)⁻¹ K_Zz_i.
    const Matrix embed = u * ((s.array() * d.array()).matrix().asDiagonal() * u.transpose()) * kxx;
    double best = std::numeric_limits<double>::infinity();
    for (double xi : options.xi_grid) {
      Vector alpha = weights_for(xi);
      const double err = (y1c - embed * alpha).squaredNorm() / dn;
      if (err < best) {
        best = err;
        fit.xi = xi;
        fit.weights = std::move(alpha);
      }
    }
  }
  fit.x_train = x1;
  fit.z_train = z1;
  fit.n_stage1 = n;
  fit.n_stage2 = m;
  return fit;
}

}  // namespace compiv
