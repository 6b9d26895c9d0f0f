#include "compiv/simplex.hpp"

#include "compiv/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace compiv {

namespace {

void require_finite_nonnegative(const Vector& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw DomainError(std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
    if (v[i] < 0.0) {
      throw DomainError(std::string(what) + ": negative entry at index " + std::to_string(i));
    }
  }
}

void require_same_length(const Composition& x, const Composition& w) {
  if (x.size() != w.size()) {
    throw DimensionError("composition length mismatch: " + std::to_string(x.size()) + " vs " +
                         std::to_string(w.size()));
  }
}

void require_strictly_positive(const Composition& x, const char* what) {
  if (!x.strictly_positive()) {
    throw DomainError(std::string(what) + ": composition has zero parts");
  }
}

// Sums within a few ulps of one are left untouched so closure is idempotent.
bool sums_to_one_exactly(double sum, Eigen::Index p) {
  return std::abs(sum - 1.0) <= 4.0 * static_cast<double>(p) * std::numeric_limits<double>::epsilon();
}

}  // namespace

Composition::Composition(Vector parts) : parts_(std::move(parts)) {
  if (parts_.size() < 2) {
    throw DimensionError("a composition needs at least 2 parts");
  }
  require_finite_nonnegative(parts_, "composition");
  const double sum = parts_.sum();
  if (sum <= 0.0) {
    throw DegenerateInputError("composition: all parts are zero");
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    parts_ /= sum;
    reclosed_ = true;
  }
}

Composition Composition::uniform(Eigen::Index p) {
  return Composition(Vector::Constant(p, 1.0 / static_cast<double>(p)));
}

CountVector::CountVector(Vector counts) : counts_(std::move(counts)) {
  require_finite_nonnegative(counts_, "count vector");
  if (counts_.size() < 2) {
    throw DimensionError("a count vector needs at least 2 entries");
  }
  if (!(counts_.array() > 0.0).any()) {
    throw DegenerateInputError("count vector: all counts are zero");
  }
}

Composition closure(const Vector& v) {
  if (v.size() < 2) {
    throw DimensionError("closure needs at least 2 parts");
  }
  require_finite_nonnegative(v, "closure");
  const double sum = v.sum();
  if (sum <= 0.0) {
    throw DegenerateInputError("closure of an all-zero vector");
  }
  if (sums_to_one_exactly(sum, v.size())) {
    return Composition(v);
  }
  return Composition(v / sum);
}

Composition perturb(const Composition& x, const Composition& w) {
  require_same_length(x, w);
  require_strictly_positive(x, "perturb");
  require_strictly_positive(w, "perturb");
  return closure(x.parts().cwiseProduct(w.parts()));
}

Composition power(double a, const Composition& x) {
  if (!std::isfinite(a)) {
    throw DomainError("power: non-finite exponent");
  }
  if (a <= 0.0) {
    require_strictly_positive(x, "power with non-positive exponent");
  }
  // Divide by the largest part first so large |a| does not underflow to zero.
  const Vector scaled = x.parts() / x.parts().maxCoeff();
  return closure(scaled.array().pow(a).matrix());
}

double aitchison_inner(const Composition& x, const Composition& w) {
  require_same_length(x, w);
  require_strictly_positive(x, "aitchison_inner");
  require_strictly_positive(w, "aitchison_inner");
  // (1/2p) Σ_ij (a_i - a_j)(b_i - b_j) = Σ a_i b_i - (1/p) Σa Σb.
  const Vector a = x.parts().array().log().matrix();
  const Vector b = w.parts().array().log().matrix();
  const double p = static_cast<double>(a.size());
  const Vector ac = a.array() - a.sum() / p;
  const Vector bc = b.array() - b.sum() / p;
  return ac.dot(bc);
}

double aitchison_norm(const Composition& x) { return std::sqrt(aitchison_inner(x, x)); }

Composition pseudo_count(const CountVector& c, double pc) {
  if (!(pc > 0.0) || !std::isfinite(pc)) {
    throw DomainError("pseudo-count must be positive, got " + std::to_string(pc));
  }
  return closure((c.counts().array() + pc).matrix());
}

DiversityKind parse_diversity_kind(std::string_view name) {
  if (name == "richness") return DiversityKind::kRichness;
  if (name == "shannon") return DiversityKind::kShannon;
  if (name == "simpson") return DiversityKind::kSimpson;
  throw DomainError("unknown diversity measure '" + std::string(name) + "'");
}

std::string_view to_string(DiversityKind kind) {
  switch (kind) {
    case DiversityKind::kRichness: return "richness";
    case DiversityKind::kShannon: return "shannon";
    case DiversityKind::kSimpson: return "simpson";
  }
  return "unknown";
}

double diversity(const Composition& x, DiversityKind kind, double zero_threshold) {
  const Vector& v = x.parts();
  switch (kind) {
    case DiversityKind::kRichness:
      return static_cast<double>((v.array() > zero_threshold).count());
    case DiversityKind::kShannon: {
      double h = 0.0;
      for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (v[j] > 0.0) h -= v[j] * std::log(v[j]);
      }
      return h;
    }
    case DiversityKind::kSimpson:
      return -v.squaredNorm();
  }
  return 0.0;
}

void require_positive_compositions(const Matrix& rows) {
  if (rows.cols() < 2) {
    throw DimensionError("compositions need at least 2 parts");
  }
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      const double v = rows(i, j);
      if (!std::isfinite(v) || v <= 0.0) {
        throw DomainError("composition row " + std::to_string(i) + " has a non-positive or non-finite part at " +
                          std::to_string(j) + " (apply a pseudo-count upstream)");
      }
    }
    if (std::abs(rows.row(i).sum() - 1.0) > kSumTolerance) {
      throw DomainError("composition row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

Matrix close_rows(const Matrix& rows) {
  Matrix out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out.row(i) = closure(rows.row(i).transpose()).parts().transpose();
  }
  return out;
}

Matrix log_rows(const Matrix& rows) {
  if ((rows.array() <= 0.0).any()) {
    throw DomainError("log of a batch with zero parts");
  }
  return rows.array().log().matrix();
}

}  // namespace compiv
