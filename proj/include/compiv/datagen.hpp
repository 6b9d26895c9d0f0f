#pragma once

#include "compiv/dataset.hpp"
#include "compiv/rng.hpp"
#include "compiv/simplex.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace compiv {

enum class Setting { kA, kANonlinear, kAWeak, kB };

std::string to_string(Setting setting);
Setting parse_setting(const std::string& name);

/// Linear-in-ilr generator:
///   Z_j ~ U(0, 1), U ~ N(μ_c, 1)
///   ilr(X) = α₀ + αᵀZ + c_X U
///   Y = β₀ + βᵀ ilr(X) + c_Y U                          (A, A-weak)
///   Y = β₀ + βᵀ ilr(X)/10 + 1ᵀ(ilr(X) + 1)³/20 + c_Y U   (A-nonlinear)
/// with β = Vᵀ β_log for the Helmert basis V.
struct SettingAParams {
  double mu_c = 0.0;
  Vector alpha0;  ///< p-1
  Matrix alpha;   ///< q×(p-1)
  Vector c_x;     ///< p-1
  double beta0 = 0.0;
  Vector beta_log;  ///< p, sums to zero
  double c_y = 0.0;
};

/// Zero-inflated negative binomial generator:
///   Z_j ~ U(z_min, z_max), U ~ U(u_min, u_max), μ = α₀ + αᵀZ
///   X = C(ZINB(μ, θ, η)) ⊕ (U ⊙ Ω_C)
///   Y = β₀ + β_logᵀ log X + c_Yᵀ log(U ⊙ Ω_C)
struct SettingBParams {
  double z_min = 0.0;
  double z_max = 10.0;
  double u_min = 0.2;
  double u_max = 3.0;
  Vector alpha0;  ///< p
  Matrix alpha;   ///< q×p
  double theta = 2.0;
  Vector eta;      ///< p, zero-inflation probabilities in [0, 1)
  Vector omega_c;  ///< p, a composition
  double beta0 = 0.0;
  Vector beta_log;  ///< p, sums to zero
  Vector c_y;       ///< p
  double pseudo_count = kDefaultPseudoCount;
};

struct SimulationSpec {
  Setting setting = Setting::kA;
  std::string preset;  ///< empty for hand-built specs
  int p = 3;
  int q = 2;
  int n = 1000;
  std::uint64_t seed = 0;
  SettingAParams a;
  SettingBParams b;

  bool is_setting_a() const noexcept { return setting != Setting::kB; }
  /// Throws DomainError / DimensionError describing the first violation.
  void validate() const;
};

/// Names accepted by make_preset: A-p3, A-p30, A-p250, A-weak,
/// A-nonlinear, B-p3, B-p30, B-p250, diversity.
const std::vector<std::string>& preset_names();

/// Builds a named preset. The B-p30/B-p250 entries of α₀ and Ω_C that are
/// drawn at random come from the seed's scenario-params stream. n = 0 keeps
/// the preset's default sample size.
SimulationSpec make_preset(const std::string& name, std::uint64_t seed, int n = 0);

inline constexpr int kDefaultInterventions = 250;
inline constexpr int kOracleDraws = 1000000;

/// Interventional-effect oracle E_U[f(x, U)].
class GroundTruth {
 public:
  explicit GroundTruth(SimulationSpec spec);
  /// Restores a truth whose oracle constant was computed earlier.
  GroundTruth(SimulationSpec spec, double oracle_const);

  const SimulationSpec& spec() const noexcept { return spec_; }
  const Vector& beta_log() const noexcept { return beta_log_; }
  double beta0() const noexcept { return beta0_; }
  /// c_Y μ_c in Setting A; the Monte Carlo estimate of
  /// E_U[c_Yᵀ log(U ⊙ Ω_C)] in Setting B.
  double oracle_const() const noexcept { return oracle_const_; }
  /// Monte Carlo standard error of oracle_const() (0 for Setting A).
  double oracle_std_error() const noexcept { return oracle_se_; }
  /// Whether β_log fully describes the effect (false for A-nonlinear).
  bool linear() const noexcept { return spec_.setting != Setting::kANonlinear; }

  double true_effect(const Composition& x) const;
  Vector true_effect_rows(const Matrix& x) const;

 private:
  SimulationSpec spec_;
  Vector beta_log_;
  Vector beta_ilr_;
  double beta0_ = 0.0;
  double oracle_const_ = 0.0;
  double oracle_se_ = 0.0;
};

/// Monte Carlo estimate of E_U[c_Yᵀ log(U ⊙ Ω_C)] and its standard error.
std::pair<double, double> setting_b_oracle(const SettingBParams& b, std::uint64_t seed, int draws = kOracleDraws);

struct Simulation {
  IVDataset data;
  GroundTruth truth;
  /// Setting B only: the raw ZINB counts before zero handling (n×p).
  Matrix counts;
  Vector confounder;
};

Simulation generate(const SimulationSpec& spec);

/// Fresh compositions from the marginal treatment generator (new Z and U)
/// on the intervention stream of `seed`, or of spec.seed when absent.
Matrix interventional_sample(const SimulationSpec& spec, int m = kDefaultInterventions,
                             std::optional<std::uint64_t> seed = std::nullopt);

/// Per component: 0 with probability η_j, else negative binomial with mean
/// μ_j and shape θ (variance μ_j + μ_j²/θ), drawn as a Poisson–Gamma mixture.
Vector sample_zinb(const Vector& mu, double theta, const Vector& eta, Engine& engine);

}  // namespace compiv
