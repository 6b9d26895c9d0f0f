#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string_view>

namespace compiv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Tolerance on the unit-sum constraint of a composition.
inline constexpr double kSumTolerance = 1e-9;
/// Default additive constant for zero replacement in raw counts.
inline constexpr double kDefaultPseudoCount = 0.5;
/// Parts at or below this value are treated as absent by richness.
inline constexpr double kRichnessZeroThreshold = 1e-12;

/// A point on the unit simplex with p >= 2 parts.
///
/// Construction validates non-negativity and finiteness. Inputs whose sum is
/// off by more than kSumTolerance are re-closed and flagged through
/// reclosed(), which is what float round-trips through CSV need.
class Composition {
 public:
  explicit Composition(Vector parts);

  const Vector& parts() const noexcept { return parts_; }
  Eigen::Index size() const noexcept { return parts_.size(); }
  double operator[](Eigen::Index i) const { return parts_[i]; }

  bool reclosed() const noexcept { return reclosed_; }
  bool strictly_positive() const noexcept { return (parts_.array() > 0.0).all(); }

  /// Uniform composition with p parts; the neutral element of perturbation.
  static Composition uniform(Eigen::Index p);

 private:
  Vector parts_;
  bool reclosed_ = false;
};

/// Raw non-negative abundances, e.g. sequencing counts, before closure.
class CountVector {
 public:
  explicit CountVector(Vector counts);
  const Vector& counts() const noexcept { return counts_; }
  Eigen::Index size() const noexcept { return counts_.size(); }

 private:
  Vector counts_;
};

Composition closure(const Vector& v);

/// x ⊕ w: component-wise product followed by closure.
Composition perturb(const Composition& x, const Composition& w);

/// a ⊙ x: component-wise power followed by closure. Zero parts are only
/// allowed for a > 0.
Composition power(double a, const Composition& x);

/// Aitchison inner product (1/2p) Σ_ij log(x_i/x_j) log(w_i/w_j).
double aitchison_inner(const Composition& x, const Composition& w);

double aitchison_norm(const Composition& x);

/// Adds pc to every count and closes. pc must be positive.
Composition pseudo_count(const CountVector& c, double pc = kDefaultPseudoCount);

enum class DiversityKind { kRichness, kShannon, kSimpson };

DiversityKind parse_diversity_kind(std::string_view name);
std::string_view to_string(DiversityKind kind);

/// α-diversity of a closed composition.
///
/// Simpson uses the sign convention -Σ x_j², not the Gini–Simpson 1 - Σ x_j².
/// The two differ by a constant, so regression slopes are identical and only
/// intercepts shift. Shannon treats 0·log 0 as 0.
double diversity(const Composition& x, DiversityKind kind,
                 double zero_threshold = kRichnessZeroThreshold);

// Row-wise helpers over batches stored as n×p matrices, one composition per
// row. They apply the same validation as the single-composition versions.

/// Throws DomainError naming the first offending row if any row is not a
/// valid strictly positive composition.
void require_positive_compositions(const Matrix& rows);

/// Closes each row; rows must be non-negative with positive sum.
Matrix close_rows(const Matrix& rows);

/// Element-wise log of a strictly positive batch.
Matrix log_rows(const Matrix& rows);

}  // namespace compiv
