#include "doctest.h"

#include "compiv/error.hpp"
#include "compiv/ols.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace compiv;
using compiv::testing::random_matrix;
using compiv::testing::random_vector;

TEST_CASE("ols recovers a noiseless linear map") {
  std::mt19937_64 rng(1);
  const Matrix z = random_matrix(rng, 60, 3);
  const Matrix a = random_matrix(rng, 3, 2);
  const Vector b = random_vector(rng, 2);
  const Matrix t = (z * a).rowwise() + b.transpose();
  const OlsFit fit = fit_ols(z, t);
  CHECK((fit.coef - a).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((fit.intercept - b).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("ols single instrument slope is cov over var") {
  std::mt19937_64 rng(2);
  const Matrix z = random_matrix(rng, 200, 1);
  const Matrix t = 0.7 * z + random_matrix(rng, 200, 1);
  const double zm = z.col(0).mean(), tm = t.col(0).mean();
  const double cov = ((z.col(0).array() - zm) * (t.col(0).array() - tm)).sum();
  const double var = (z.col(0).array() - zm).square().sum();
  CHECK(std::abs(fit_ols(z, t).coef(0, 0) - cov / var) <= 1e-10);
}

TEST_CASE("ols residuals are orthogonal to the instruments") {
  std::mt19937_64 rng(3);
  const Matrix z = random_matrix(rng, 300, 4);
  const Matrix t = z * random_matrix(rng, 4, 3) + random_matrix(rng, 300, 3);
  const OlsFit fit = fit_ols(z, t);
  const Matrix resid = t - fit.predict(z);
  CHECK((z.transpose() * resid).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(resid.colwise().mean().cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("ols on an independent target gives slopes near zero") {
  std::mt19937_64 rng(4);
  const Eigen::Index n = 10000;
  const Matrix z = random_matrix(rng, n, 2);
  const Matrix t = random_matrix(rng, n, 1);
  const OlsFit fit = fit_ols(z, t);
  const double se = 1.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(fit.coef(0, 0)) < 3 * se);
  CHECK(std::abs(fit.coef(1, 0)) < 3 * se);
}

TEST_CASE("ols rejects collinear instruments and names them") {
  std::mt19937_64 rng(5);
  Matrix z = random_matrix(rng, 50, 3);
  z.col(2) = 2.0 * z.col(0) - z.col(1);
  const Matrix t = random_matrix(rng, 50, 1);
  CHECK_THROWS_AS(fit_ols(z, t), RankDeficientError);
  try {
    fit_ols(z, t);
  } catch (const RankDeficientError& e) {
    CHECK(std::string(e.what()).find("z_") != std::string::npos);
  }
  CHECK_THROWS_AS(fit_ols(random_matrix(rng, 3, 2), random_matrix(rng, 3, 1)), DegenerateInputError);
}

TEST_CASE("f statistic matches its definition") {
  std::mt19937_64 rng(6);
  const Eigen::Index n = 120, q = 2;
  const Matrix z = random_matrix(rng, n, q);
  const Matrix t = z * random_matrix(rng, q, 1) + random_matrix(rng, n, 1);
  const Vector resid = t.col(0) - fit_ols(z, t).predict(z).col(0);
  const double rss1 = resid.squaredNorm();
  const double rss0 = (t.col(0).array() - t.col(0).mean()).square().sum();
  const double expected = ((rss0 - rss1) / q) / (rss1 / static_cast<double>(n - q - 1));
  CHECK(first_stage_f_stats(z, t)[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("f statistic on pure noise is calibrated") {
  int rejections = 0;
  double total = 0.0;
  const int seeds = 400;
  // F(2, 197) upper 5% point.
  const double critical = 3.041;
  for (int s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(1000 + s);
    const double f = first_stage_f_stats(random_matrix(rng, 200, 2), random_matrix(rng, 200, 1))[0];
    total += f;
    if (f > critical) ++rejections;
  }
  CHECK(total / seeds == doctest::Approx(1.0).epsilon(0.15));
  CHECK(rejections >= 8);
  CHECK(rejections <= 36);
}

TEST_CASE("2sls equals the manual two-stage composition") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index n = 150, d = 1 + k % 3, q = d + k % 2;
    const Matrix z = random_matrix(rng, n, q);
    const Matrix x = z * random_matrix(rng, q, d) + random_matrix(rng, n, d);
    const Vector y = x * random_vector(rng, d) + random_vector(rng, n);
    const TwoStageFit fit = two_stage_least_squares(z, x, y);
    Matrix design(n, d + 1);
    design << Vector::Ones(n), fit_ols(z, x).predict(z);
    const Vector manual = design.colPivHouseholderQr().solve(y);
    CHECK(std::abs(fit.intercept - manual[0]) <= 1e-8);
    CHECK((fit.coef - manual.tail(d)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("2sls just-identified reduction") {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index n = 100, d = 1 + k % 4;
    const Matrix z = random_matrix(rng, n, d);
    const Matrix x = z * random_matrix(rng, d, d) + 0.3 * random_matrix(rng, n, d);
    const Vector y = random_vector(rng, n);
    const TwoStageFit fit = two_stage_least_squares(z, x, y);
    Matrix z1(n, d + 1), x1(n, d + 1);
    z1 << Vector::Ones(n), z;
    x1 << Vector::Ones(n), x;
    const Vector reduced = (z1.transpose() * x1).fullPivLu().solve(z1.transpose() * y);
    CHECK(std::abs(fit.intercept - reduced[0]) <= 1e-8);
    CHECK((fit.coef - reduced.tail(d)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("2sls with the treatment as its own instrument") {
  std::mt19937_64 rng(9);
  const Matrix x = random_matrix(rng, 40, 1);
  const Vector y = 2.0 * x.col(0);
  const TwoStageFit fit = two_stage_least_squares(x, x, y);
  CHECK(fit.coef[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(fit.intercept) <= 1e-12);
}

TEST_CASE("2sls removes confounding bias") {
  std::mt19937_64 rng(10);
  const Eigen::Index n = 10000;
  const Matrix z = random_matrix(rng, n, 2);
  const Vector u = random_vector(rng, n);
  Matrix x(n, 1);
  x.col(0) = z.col(0) + z.col(1) + u + 0.5 * random_vector(rng, n);
  const Vector y = (1.5 * x.col(0).array() + 3.0 * u.array() + 0.5 * random_vector(rng, n).array() + 1.0).matrix();
  const TwoStageFit fit = two_stage_least_squares(z, x, y);
  CHECK(std::abs(fit.coef[0] - 1.5) < 0.05);

  Matrix unconfounded = x;
  unconfounded.col(0) = z.col(0) + z.col(1) + 0.5 * random_vector(rng, n);
  const Vector y0 = (1.5 * unconfounded.col(0).array() + 0.5 * random_vector(rng, n).array()).matrix();
  CHECK(std::abs(two_stage_least_squares(z, unconfounded, y0).coef[0] - 1.5) < 0.05);
}

TEST_CASE("2sls identification errors") {
  std::mt19937_64 rng(11);
  const Matrix z = random_matrix(rng, 50, 1);
  const Matrix x = random_matrix(rng, 50, 2);
  const Vector y = random_vector(rng, 50);
  CHECK_THROWS_AS(two_stage_least_squares(z, x, y), UnderIdentifiedError);
  Matrix dup(50, 2);
  dup << x.col(0), x.col(0);
  CHECK_THROWS_AS(two_stage_least_squares(random_matrix(rng, 50, 2), dup, y), RankDeficientError);
  CHECK_THROWS_AS(two_stage_least_squares(random_matrix(rng, 49, 2), x, y), DimensionError);
}
