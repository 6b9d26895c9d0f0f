#include "compiv/constrained_lasso.hpp"
#include "compiv/datagen.hpp"
#include "compiv/error.hpp"
#include "compiv/iv_pipelines.hpp"
#include "compiv/logratio.hpp"
#include "compiv/metrics.hpp"
#include "compiv/ols.hpp"
#include "compiv/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace compiv;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (ok ? "" : "[x] ") << what << "; ";
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Composition random_composition(std::mt19937_64& rng, Eigen::Index p) {
  std::normal_distribution<double> normal(0.0, 2.0);
  Vector v(p);
  for (Eigen::Index j = 0; j < p; ++j) v[j] = normal(rng);
  return closure((v.array() - v.maxCoeff()).exp().matrix());
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
  return m;
}

void transforms(Outcome& o) {
  std::mt19937_64 rng(11);
  double round_trip = 0.0, isometry = 0.0, clr_sum = 0.0;
  for (Eigen::Index p : {2, 3, 10, 100}) {
    const LogRatioBasis basis = helmert_basis(p);
    for (int k = 0; k < 1000; ++k) {
      const Composition x = random_composition(rng, p);
      const Composition w = random_composition(rng, p);
      const Vector& xp = x.parts();
      round_trip = std::max(round_trip, (alr_inv(alr(x)).parts() - xp).cwiseAbs().maxCoeff());
      round_trip = std::max(round_trip, (clr_inv(clr(x)).parts() - xp).cwiseAbs().maxCoeff());
      round_trip = std::max(round_trip, (ilr_inv(ilr(x, basis), basis).parts() - xp).cwiseAbs().maxCoeff());
      isometry = std::max(isometry, std::abs(ilr(x, basis).dot(ilr(w, basis)) - aitchison_inner(x, w)));
      clr_sum = std::max(clr_sum, std::abs(clr(x).sum()));
    }
  }
  o.require(round_trip <= 1e-10, "round-trip max error " + fmt(round_trip));
  o.require(isometry <= 1e-8, "isometry max error " + fmt(isometry));
  o.require(clr_sum <= 1e-10, "clr sum max " + fmt(clr_sum));
}

// Equality-constrained least squares through its KKT system.
Vector kkt_solution(const Matrix& x, const Vector& y) {
  const Eigen::Index p = x.cols();
  const Matrix xc = x.rowwise() - x.colwise().mean();
  const Vector yc = (y.array() - y.mean()).matrix();
  Matrix k = Matrix::Zero(p + 1, p + 1);
  k.topLeftCorner(p, p) = 2.0 * xc.transpose() * xc;
  k.block(0, p, p, 1).setOnes();
  k.block(p, 0, 1, p).setOnes();
  Vector rhs = Vector::Zero(p + 1);
  rhs.head(p) = 2.0 * xc.transpose() * yc;
  return k.fullPivLu().solve(rhs).head(p);
}

void solver(Outcome& o) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> pick_p(2, 10), pick_n(30, 100);
  double kkt_gap = 0.0, constraint = 0.0;
  bool zero_at_max = true;
  for (int k = 0; k < 20; ++k) {
    const int p = pick_p(rng), n = pick_n(rng);
    Matrix x(n, p);
    for (int i = 0; i < n; ++i) x.row(i) = random_composition(rng, p).parts().array().log().matrix().transpose();
    Vector beta = random_matrix(rng, p, 1).col(0);
    beta.array() -= beta.mean();
    const Vector y = x * beta + 0.3 * random_matrix(rng, n, 1).col(0);
    const LossSpec loss = LossSpec::squared();
    const LinearFit free_fit = fit_constrained_lasso(x, y, loss, 0.0);
    kkt_gap = std::max(kkt_gap, (free_fit.beta_log - kkt_solution(x, y)).cwiseAbs().maxCoeff());
    const double lmax = lambda_max(x, y, loss);
    for (double scale : {1.0, 2.0}) {
      const LinearFit zero_fit = fit_constrained_lasso(x, y, loss, scale * lmax);
      zero_at_max = zero_at_max && (zero_fit.beta_log.array() == 0.0).all();
      constraint = std::max(constraint, std::abs(zero_fit.beta_log.sum()));
    }
    for (double lam : default_lambda_grid(lmax, 10)) {
      constraint = std::max(constraint, std::abs(fit_constrained_lasso(x, y, loss, lam).beta_log.sum()));
    }
    constraint = std::max(constraint, std::abs(free_fit.beta_log.sum()));
  }
  o.require(kkt_gap <= 1e-6, "lambda=0 vs KKT max gap " + fmt(kkt_gap));
  o.require(zero_at_max, "exact zeros at lambda >= lambda_max");
  o.require(constraint <= 1e-8, "max |sum beta| " + fmt(constraint));
}

void two_stage_algebra(Outcome& o) {
  std::mt19937_64 rng(37);
  double manual_gap = 0.0, just_gap = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int n = 200, d = 1 + k % 3, q = d + k % 2;
    const Matrix z = random_matrix(rng, n, q);
    const Matrix x = z * random_matrix(rng, q, d) + 0.5 * random_matrix(rng, n, d);
    const Vector y = x * random_matrix(rng, d, 1).col(0) + random_matrix(rng, n, 1).col(0);
    const TwoStageFit fit = two_stage_least_squares(z, x, y);
    Vector got(d + 1);
    got << fit.intercept, fit.coef;

    const Matrix x_hat = fit_ols(z, x).predict(z);
    Matrix design(n, d + 1);
    design << Vector::Ones(n), x_hat;
    const Vector manual = design.colPivHouseholderQr().solve(y);
    manual_gap = std::max(manual_gap, (got - manual).cwiseAbs().maxCoeff());

    if (q == d) {
      Matrix z1(n, q + 1), x1(n, d + 1);
      z1 << Vector::Ones(n), z;
      x1 << Vector::Ones(n), x;
      const Vector reduced = (z1.transpose() * x1).fullPivLu().solve(z1.transpose() * y);
      just_gap = std::max(just_gap, (got - reduced).cwiseAbs().maxCoeff());
    }
  }
  o.require(manual_gap <= 1e-8, "two-stage composition gap " + fmt(manual_gap));
  o.require(just_gap <= 1e-8, "just-identified reduction gap " + fmt(just_gap));
}

const BenchmarkRow& row_of(const BenchmarkTable& t, Method m) {
  for (const auto& r : t.rows)
    if (r.method == m) return r;
  throw Error("missing benchmark row");
}

std::vector<const BenchmarkRecord*> records_of(const BenchmarkTable& t, Method m) {
  std::vector<const BenchmarkRecord*> out;
  for (const auto& r : t.records)
    if (r.method == m && r.ok) out.push_back(&r);
  return out;
}

BenchmarkTable run(const std::string& preset, const std::vector<Method>& methods, int seeds) {
  BenchmarkOptions options;
  options.n_seeds = seeds;
  options.base_seed = 1;
  return benchmark({preset}, methods, options);
}

std::string summary(const BenchmarkRow& r) {
  std::string s = display_name(r.method) + " OOS " + fmt(r.oos_mse.mean);
  if (r.beta_mse) s += " beta " + fmt(r.beta_mse->mean);
  if (r.n_failed) s += " failed " + std::to_string(r.n_failed);
  return s;
}

void setting_a_p3(Outcome& o) {
  const auto t = run("A-p3", {Method::kTwoStage, Method::kIlrLc, Method::kKivIlr, Method::kDirLc, Method::kOnlyLc}, 50);
  const auto& ilr = row_of(t, Method::kIlrLc);
  const auto& only = row_of(t, Method::kOnlyLc);
  const auto& raw = row_of(t, Method::kTwoStage);
  const auto& kiv = row_of(t, Method::kKivIlr);
  const auto& dir = row_of(t, Method::kDirLc);
  o.require(ilr.oos_mse.mean < 1.0, summary(ilr));
  o.require(only.oos_mse.mean >= 8.0 && only.oos_mse.mean <= 25.0, "OnlyLC OOS " + fmt(only.oos_mse.mean));
  o.require(raw.oos_mse.mean > 50.0, "2SLS OOS " + fmt(raw.oos_mse.mean));
  o.require(ilr.beta_mse && ilr.beta_mse->mean < 2.0, "ILR+LC beta " + fmt(ilr.beta_mse ? ilr.beta_mse->mean : NAN));
  o.require(only.beta_mse && only.beta_mse->mean >= 20.0 && only.beta_mse->mean <= 45.0,
            "OnlyLC beta " + fmt(only.beta_mse ? only.beta_mse->mean : NAN));
  const bool order = ilr.oos_mse.mean <= kiv.oos_mse.mean && kiv.oos_mse.mean < dir.oos_mse.mean &&
                     dir.oos_mse.mean < only.oos_mse.mean;
  o.require(order, "ordering ILR+LC " + fmt(ilr.oos_mse.mean) + " <= KIV " + fmt(kiv.oos_mse.mean) + " < DIR+LC " +
                       fmt(dir.oos_mse.mean) + " < OnlyLC " + fmt(only.oos_mse.mean));
}

void setting_a_p30(Outcome& o) {
  const auto t = run("A-p30", {Method::kIlrLc, Method::kOnlyLc}, 10);
  const auto& ilr = row_of(t, Method::kIlrLc);
  const auto& only = row_of(t, Method::kOnlyLc);
  bool fz_zero = ilr.n_failed == 0;
  for (const auto* r : records_of(t, Method::kIlrLc)) fz_zero = fz_zero && r->metrics.fz && *r->metrics.fz == 0;
  o.require(fz_zero, "ILR+LC FZ = 0 on every seed");
  o.require(ilr.fnz && ilr.fnz->mean <= 0.5, "ILR+LC mean FNZ " + fmt(ilr.fnz ? ilr.fnz->mean : NAN));
  o.require(ilr.beta_mse && ilr.beta_mse->mean < 1.0, "ILR+LC beta " + fmt(ilr.beta_mse ? ilr.beta_mse->mean : NAN));
  o.require(only.beta_mse && only.beta_mse->mean > 1.5, "OnlyLC beta " + fmt(only.beta_mse ? only.beta_mse->mean : NAN));
}

void setting_b_p3(Outcome& o) {
  const auto t = run("B-p3", {Method::kIlrLc, Method::kDirLc, Method::kOnlyLc}, 20);
  const auto& ilr = row_of(t, Method::kIlrLc);
  const auto& dir = row_of(t, Method::kDirLc);
  const auto& only = row_of(t, Method::kOnlyLc);
  o.require(ilr.oos_mse.mean >= 5.0 && ilr.oos_mse.mean <= 60.0, "ILR+LC OOS " + fmt(ilr.oos_mse.mean));
  o.require(only.oos_mse.mean >= 150.0 && only.oos_mse.mean <= 450.0, "OnlyLC OOS " + fmt(only.oos_mse.mean));
  o.require(dir.n_ok > 0 && dir.oos_mse.mean > 10.0 * ilr.oos_mse.mean,
            "DIR+LC OOS " + fmt(dir.oos_mse.mean) + " vs 10x ILR+LC " + fmt(10.0 * ilr.oos_mse.mean) +
                (dir.n_failed ? " (" + std::to_string(dir.n_failed) + " failed)" : ""));
}

void setting_b_p30(Outcome& o) {
  const auto t = run("B-p30", {Method::kIlrLc, Method::kOnlyLc}, 10);
  const auto& ilr = row_of(t, Method::kIlrLc);
  const auto& only = row_of(t, Method::kOnlyLc);
  o.require(ilr.oos_mse.mean < only.oos_mse.mean / 10.0,
            "ILR+LC OOS " + fmt(ilr.oos_mse.mean) + " vs OnlyLC/10 " + fmt(only.oos_mse.mean / 10.0));
  o.require(ilr.fz && ilr.fz->mean < 1.0, "ILR+LC mean FZ " + fmt(ilr.fz ? ilr.fz->mean : NAN));
  o.require(only.fz && only.fz->mean > 3.0, "OnlyLC mean FZ " + fmt(only.fz ? only.fz->mean : NAN));
}

void instrument_strength(Outcome& o) {
  int strong = 0, weak = 0;
  const int seeds = 50;
  for (int s = 1; s <= seeds; ++s) {
    const Simulation a = generate(make_preset("A-p3", static_cast<std::uint64_t>(s)));
    const Vector fa = first_stage_f_stats(a.data.z, ilr_rows(a.data.x, helmert_basis(a.data.p())));
    if (fa.minCoeff() > 10.0) ++strong;
    const Simulation w = generate(make_preset("A-weak", static_cast<std::uint64_t>(s)));
    const Vector fw = first_stage_f_stats(w.data.z, ilr_rows(w.data.x, helmert_basis(w.data.p())));
    if (fw.minCoeff() < 10.0) ++weak;
  }
  o.require(strong >= 0.95 * seeds, "A-p3 both F > 10 in " + std::to_string(strong) + "/50");
  o.require(weak >= 0.8 * seeds, "A-weak min F < 10 in " + std::to_string(weak) + "/50");
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

void diversity_contradiction(Outcome& o) {
  const int seeds = 20;
  int opposite = 0, agree_shannon = 0, agree_simpson = 0;
  for (int s = 1; s <= seeds; ++s) {
    const Simulation sim = generate(make_preset("diversity", static_cast<std::uint64_t>(s)));
    const PipelineOptions pipeline = seeded_pipeline({}, static_cast<std::uint64_t>(s));
    const double sh = fit_diversity_iv(sim.data, DiversityKind::kShannon, DiversityMethod::kTwoStage, pipeline).slope;
    const double si = fit_diversity_iv(sim.data, DiversityKind::kSimpson, DiversityMethod::kTwoStage, pipeline).slope;
    const double sh_k = fit_diversity_iv(sim.data, DiversityKind::kShannon, DiversityMethod::kKiv, pipeline).slope;
    const double si_k = fit_diversity_iv(sim.data, DiversityKind::kSimpson, DiversityMethod::kKiv, pipeline).slope;
    if (sign(sh) * sign(si) < 0) ++opposite;
    if (sign(sh) == sign(sh_k)) ++agree_shannon;
    if (sign(si) == sign(si_k)) ++agree_simpson;
  }
  o.require(opposite >= 0.8 * seeds, "2SLS Shannon/Simpson opposite signs " + std::to_string(opposite) + "/20");
  o.require(agree_shannon >= 0.8 * seeds && agree_simpson >= 0.8 * seeds,
            "KIV agrees with 2SLS " + std::to_string(agree_shannon) + "/20 (Shannon), " +
                std::to_string(agree_simpson) + "/20 (Simpson)");
}

void zinb_moments(Outcome& o) {
  const double mu = 6.0, theta = 2.0;
  const int draws = 1000000;
  Engine engine = make_engine(5, "acceptance-zinb");
  const Vector mus = Vector::Constant(1, mu);
  const Vector eta = Vector::Zero(1);
  double mean = 0.0, m2 = 0.0;
  for (int k = 1; k <= draws; ++k) {
    const double v = sample_zinb(mus, theta, eta, engine)[0];
    const double delta = v - mean;
    mean += delta / k;
    m2 += delta * (v - mean);
  }
  const double var = m2 / (draws - 1);
  const double target_var = mu + mu * mu / theta;
  o.require(std::abs(mean - mu) <= 0.01 * mu, "mean " + fmt(mean) + " vs " + fmt(mu));
  o.require(std::abs(var - target_var) <= 0.03 * target_var, "variance " + fmt(var) + " vs " + fmt(target_var));
}

void classification(Outcome& o) {
  const int seeds = 20;
  int recovered = 0;
  PipelineOptions base;
  base.loss = LossSpec::squared_hinge();
  for (int s = 1; s <= seeds; ++s) {
    Simulation sim = generate(make_preset("A-p3", static_cast<std::uint64_t>(s)));
    const double mean = sim.data.y.mean();
    for (Eigen::Index i = 0; i < sim.data.n(); ++i) sim.data.y[i] = sim.data.y[i] > mean ? 1.0 : -1.0;
    const CausalFit fit = fit_ilr_lc(sim.data, seeded_pipeline(base, static_cast<std::uint64_t>(s)));
    const Vector& truth = sim.truth.beta_log();
    bool ok = true;
    for (Eigen::Index j = 0; j < truth.size(); ++j) {
      if (truth[j] != 0.0 && sign(fit.linear->beta_log[j]) != sign(truth[j])) ok = false;
    }
    if (ok) ++recovered;
  }
  o.require(recovered >= 0.8 * seeds, "sign pattern recovered in " + std::to_string(recovered) + "/20");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"transform round-trips, isometry, clr sum", transforms},
      {"constrained lasso vs KKT oracle", solver},
      {"2SLS algebra", two_stage_algebra},
      {"Setting A p=3 benchmark", setting_a_p3},
      {"Setting A p=30 benchmark", setting_a_p30},
      {"Setting B p=3 benchmark", setting_b_p3},
      {"Setting B p=30 benchmark", setting_b_p30},
      {"instrument-strength diagnostics", instrument_strength},
      {"diversity sign contradiction", diversity_contradiction},
      {"ZINB moments", zinb_moments},
      {"squared-hinge classification", classification},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[k].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "threw: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("criterion %zu %s: %s (%.1f s) %s\n", k + 1, o.pass ? "PASS" : "FAIL", criteria[k].first.c_str(), secs,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
