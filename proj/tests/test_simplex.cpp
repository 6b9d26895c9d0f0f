#include "doctest.h"

#include "compiv/error.hpp"
#include "compiv/logratio.hpp"
#include "compiv/simplex.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace compiv;
using compiv::testing::random_composition;

namespace {
Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}
void check_close(const Vector& a, const Vector& b, double tol) {
  REQUIRE(a.size() == b.size());
  CHECK((a - b).cwiseAbs().maxCoeff() <= tol);
}
}  // namespace

TEST_CASE("closure normalizes non-negative vectors") {
  check_close(closure(vec({2, 3, 5})).parts(), vec({0.2, 0.3, 0.5}), 1e-15);
  check_close(closure(vec({0.2, 0.3, 0.5})).parts(), vec({0.2, 0.3, 0.5}), 1e-15);
  check_close(closure(vec({1, 1, 1, 1})).parts(), vec({0.25, 0.25, 0.25, 0.25}), 0.0);
}

TEST_CASE("closure rejects degenerate and negative input") {
  CHECK_THROWS_AS(closure(vec({0, 0, 0})), DegenerateInputError);
  CHECK_THROWS_AS(closure(vec({1, -1, 2})), DomainError);
  CHECK_THROWS_AS(closure(vec({1})), DimensionError);
}

TEST_CASE("closure is idempotent bit for bit") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector v(7);
    for (auto& x : v) x = u(rng);
    const Composition once = closure(v);
    const Composition twice = closure(once.parts());
    CHECK(once.parts() == twice.parts());
  }
}

TEST_CASE("composition construction re-closes inputs outside tolerance") {
  const Composition c(vec({0.2, 0.3, 0.6}));
  CHECK(c.reclosed());
  CHECK(c.parts().sum() == doctest::Approx(1.0).epsilon(1e-15));
  const Composition exact(vec({0.25, 0.75}));
  CHECK_FALSE(exact.reclosed());
}

TEST_CASE("perturbation") {
  std::mt19937_64 rng(1);
  const Composition x = random_composition(rng, 5);
  check_close(perturb(x, Composition::uniform(5)).parts(), x.parts(), 1e-15);
  check_close(perturb(Composition(vec({0.5, 0.5})), Composition(vec({0.8, 0.2}))).parts(), vec({0.8, 0.2}), 1e-15);
  check_close(perturb(Composition(vec({0.2, 0.3, 0.5})), Composition(vec({0.5, 0.3, 0.2}))).parts(),
              vec({0.10 / 0.29, 0.09 / 0.29, 0.10 / 0.29}), 1e-12);
  CHECK_THROWS_AS(perturb(x, Composition::uniform(4)), DimensionError);
  CHECK_THROWS_AS(perturb(Composition(vec({0.0, 1.0})), Composition(vec({0.5, 0.5}))), DomainError);
}

TEST_CASE("power transformation") {
  std::mt19937_64 rng(2);
  const Composition x = random_composition(rng, 6);
  check_close(power(1.0, x).parts(), x.parts(), 1e-15);
  check_close(power(0.0, x).parts(), Composition::uniform(6).parts(), 1e-15);
  check_close(power(2.0, Composition(vec({0.2, 0.8}))).parts(), vec({0.04 / 0.68, 0.64 / 0.68}), 1e-12);
  CHECK_THROWS_AS(power(-1.0, Composition(vec({0.0, 1.0}))), DomainError);
  CHECK_NOTHROW(power(2.0, Composition(vec({0.0, 1.0}))));
}

TEST_CASE("simplex vector space laws") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scalar(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Composition x = random_composition(rng, 5);
    const Composition w = random_composition(rng, 5);
    const double a = scalar(rng);
    check_close(power(a, perturb(x, w)).parts(), perturb(power(a, x), power(a, w)).parts(), 1e-10);
    check_close(perturb(x, power(-1.0, x)).parts(), Composition::uniform(5).parts(), 1e-10);
  }
}

TEST_CASE("aitchison inner product") {
  std::mt19937_64 rng(4);
  const Composition x = random_composition(rng, 5);
  CHECK(aitchison_inner(Composition::uniform(5), x) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(aitchison_inner(x, x) > 0.0);
  CHECK(aitchison_inner(Composition::uniform(5), Composition::uniform(5)) == doctest::Approx(0.0));

  // Direct double sum from the definition.
  auto double_sum = [](const Composition& a, const Composition& b) {
    const double p = static_cast<double>(a.size());
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
      for (Eigen::Index j = 0; j < a.size(); ++j) s += std::log(a[i] / a[j]) * std::log(b[i] / b[j]);
    return s / (2.0 * p);
  };
  const LogRatioBasis basis = helmert_basis(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Composition a = random_composition(rng, 5);
    const Composition b = random_composition(rng, 5);
    const Composition c = random_composition(rng, 5);
    const double ab = aitchison_inner(a, b);
    CHECK(ab == doctest::Approx(double_sum(a, b)).epsilon(1e-12));
    CHECK(ab == doctest::Approx(ilr(a, basis).dot(ilr(b, basis))).epsilon(1e-10));
    CHECK(std::abs(ab - aitchison_inner(b, a)) <= 1e-12);
    // Bilinearity in the first argument under ⊕ and ⊙.
    const double lhs = aitchison_inner(perturb(power(2.5, a), c), b);
    const double rhs = 2.5 * ab + aitchison_inner(c, b);
    CHECK(std::abs(lhs - rhs) <= 1e-9);
  }
}

TEST_CASE("pseudo counts") {
  check_close(pseudo_count(CountVector(vec({0, 1, 3})), 0.5).parts(), vec({0.5 / 5.5, 1.5 / 5.5, 3.5 / 5.5}), 1e-15);
  check_close(pseudo_count(CountVector(vec({1, 1})), 0.5).parts(), vec({0.5, 0.5}), 0.0);
  check_close(pseudo_count(CountVector(vec({0, 0, 10}))).parts(), vec({0.5 / 11.5, 0.5 / 11.5, 10.5 / 11.5}), 1e-15);
  CHECK_THROWS_AS(pseudo_count(CountVector(vec({1, 2})), 0.0), DomainError);
  CHECK_THROWS_AS(CountVector(vec({0, 0})), DegenerateInputError);

  std::mt19937_64 rng(5);
  std::poisson_distribution<int> pois(1.5);
  for (int trial = 0; trial < 200; ++trial) {
    Vector counts(8);
    for (auto& c : counts) c = pois(rng);
    if (counts.sum() == 0) counts[0] = 1;
    const Composition x = pseudo_count(CountVector(counts));
    CHECK(x.strictly_positive());
    CHECK(std::abs(x.parts().sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("diversity indices") {
  CHECK(diversity(Composition::uniform(4), DiversityKind::kShannon) == doctest::Approx(std::log(4.0)));
  CHECK(diversity(Composition(vec({1, 0, 0})), DiversityKind::kSimpson) == -1.0);
  CHECK(diversity(Composition(vec({0.5, 0.5, 0})), DiversityKind::kRichness) == 2.0);
  CHECK(diversity(Composition(vec({1, 0, 0})), DiversityKind::kShannon) == 0.0);
  CHECK(parse_diversity_kind("simpson") == DiversityKind::kSimpson);
  CHECK_THROWS_AS(parse_diversity_kind("gini"), DomainError);
}

TEST_CASE("diversity is invariant under permutation") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Composition x = random_composition(rng, 9);
    std::vector<Eigen::Index> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Vector permuted(9);
    for (Eigen::Index j = 0; j < 9; ++j) permuted[j] = x[perm[static_cast<std::size_t>(j)]];
    // Sort both so the floating-point summation order is identical.
    Vector sorted_a = x.parts();
    Vector sorted_b = permuted;
    std::sort(sorted_a.begin(), sorted_a.end());
    std::sort(sorted_b.begin(), sorted_b.end());
    const Composition a(sorted_a);
    const Composition b(sorted_b);
    for (auto kind : {DiversityKind::kShannon, DiversityKind::kSimpson, DiversityKind::kRichness}) {
      CHECK(diversity(a, kind) == diversity(b, kind));
      CHECK(diversity(Composition(permuted), kind) == doctest::Approx(diversity(x, kind)).epsilon(1e-14));
    }
  }
}
