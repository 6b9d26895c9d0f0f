#include "doctest.h"

#include "compiv/error.hpp"
#include "compiv/kiv.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>

using namespace compiv;
using compiv::testing::random_matrix;
using compiv::testing::random_vector;

TEST_CASE("gaussian kernel values") {
  Matrix a(2, 2), b(1, 2);
  a << 0.0, 0.0, 1.0, 1.0;
  b << 1.0, 0.0;
  const Matrix k = gaussian_kernel(a, b, 2.0);
  CHECK(k(0, 0) == doctest::Approx(std::exp(-1.0 / 8.0)));
  CHECK(k(1, 0) == doctest::Approx(std::exp(-1.0 / 8.0)));
  CHECK(gaussian_kernel(a, a, 1.0).diagonal().isOnes());
  CHECK_THROWS_AS(gaussian_kernel(a, b, 0.0), DomainError);
}

TEST_CASE("median heuristic") {
  Matrix pts(3, 1);
  pts << 0.0, 1.0, 3.0;
  CHECK(median_heuristic(pts) == doctest::Approx(2.0));
  CHECK(median_heuristic(Matrix::Ones(5, 2)) == 1.0);
}

TEST_CASE("ridge grid") {
  const auto grid = default_ridge_grid();
  REQUIRE(grid.size() == 10);
  CHECK(grid.front() == doctest::Approx(1e-6));
  CHECK(grid.back() == doctest::Approx(1.0));
  CHECK(std::is_sorted(grid.begin(), grid.end()));
}

TEST_CASE("constant outcome gives a constant fit") {
  std::mt19937_64 rng(1);
  const Matrix z = random_matrix(rng, 300, 2);
  const Matrix x = z * random_matrix(rng, 2, 2) + random_matrix(rng, 300, 2);
  const KernelFit fit = fit_kiv(z, x, Vector::Constant(300, 4.0));
  const Vector f = fit.predict_rows(random_matrix(rng, 50, 2));
  CHECK((f.array() - 4.0).abs().maxCoeff() <= 1e-3);
}

TEST_CASE("linear instrumental variable problem") {
  double total = 0.0;
  const int seeds = 4;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(20 + seed);
    const Eigen::Index n = 1000;
    const Matrix z = random_matrix(rng, n, 1);
    const Vector u = random_vector(rng, n);
    Matrix x(n, 1);
    x.col(0) = 2.0 * z.col(0) + 0.5 * u + 0.3 * random_vector(rng, n);
    const Vector y = (2.0 * x.col(0) + u + 0.3 * random_vector(rng, n)).eval();
    KivOptions options;
    options.split_seed = 3;
    const KernelFit fit = fit_kiv(z, x, y, options);
    CHECK(fit.n_stage1 == 500);
    CHECK(fit.n_stage2 == 500);

    std::vector<double> sorted(x.data(), x.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted[n / 4], hi = sorted[3 * n / 4];
    Matrix grid(101, 1);
    for (int k = 0; k <= 100; ++k) grid(k, 0) = lo + (hi - lo) * k / 100.0;
    const Vector f = fit.predict_rows(grid);
    total += (f - 2.0 * grid.col(0)).squaredNorm() / 101.0;
  }
  CHECK(total / seeds < 0.15);
}

TEST_CASE("duplicate rows do not break the solves") {
  std::mt19937_64 rng(4);
  Matrix z = random_matrix(rng, 200, 1);
  z.bottomRows(100) = z.topRows(100);
  Matrix x = z + 0.1 * random_matrix(rng, 200, 1);
  x.bottomRows(100) = x.topRows(100);
  const Vector y = x.col(0);
  KivOptions options;
  options.lambda = 1e-6;
  options.xi = 1e-6;
  const KernelFit fit = fit_kiv(z, x, y, options);
  CHECK(fit.weights.allFinite());
  CHECK(fit.predict_rows(x).allFinite());
}

TEST_CASE("heavy regularization returns the outcome mean") {
  std::mt19937_64 rng(5);
  const Matrix z = random_matrix(rng, 400, 1);
  const Matrix x = z + random_matrix(rng, 400, 1);
  const Vector y = (3.0 * x.col(0)).array() + 1.0;
  KivOptions options;
  options.lambda = 1e6;
  options.xi = 1e6;
  const KernelFit fit = fit_kiv(z, x, y, options);
  const Vector f = fit.predict_rows(random_matrix(rng, 20, 1));
  CHECK((f.array() - fit.y_offset).abs().maxCoeff() <= 1e-2);
  CHECK(fit.lambda == 1e6);
  CHECK(fit.xi == 1e6);
}

TEST_CASE("split is reproducible and large inputs are subsampled") {
  std::mt19937_64 rng(6);
  const Matrix z = random_matrix(rng, 300, 1);
  const Matrix x = z + random_matrix(rng, 300, 1);
  const Vector y = x.col(0);
  KivOptions options;
  options.split_seed = 9;
  options.max_samples = 200;
  const KernelFit a = fit_kiv(z, x, y, options);
  const KernelFit b = fit_kiv(z, x, y, options);
  CHECK(a.subsampled);
  CHECK(a.n_stage1 + a.n_stage2 == 200);
  CHECK(a.weights == b.weights);
  CHECK(a.lambda == b.lambda);
}

TEST_CASE("kiv input validation") {
  std::mt19937_64 rng(7);
  const Matrix z = random_matrix(rng, 50, 1);
  CHECK_THROWS_AS(fit_kiv(z, random_matrix(rng, 49, 1), random_vector(rng, 50)), DimensionError);
  KivOptions bad;
  bad.stage1_fraction = 1.0;
  CHECK_THROWS_AS(fit_kiv(z, z, random_vector(rng, 50), bad), DomainError);
}
