#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ctsls/dataset.hpp"
#include "ctsls/rng.hpp"

namespace ctsls {

/// One bivariate-normal component of the (xi1, xi2) error law.
struct MixtureComponent {
  double mean1 = 0.0;
  double mean2 = 0.0;
  double var1 = 1.0;
  double var2 = 1.0;
  double rho = 0.0;
  double proportion = 1.0;
};

struct ErrorScenario {
  std::string name;
  std::vector<MixtureComponent> components;

  /// Throws InputError unless proportions are positive and sum to 1
  /// (within 1e-12), variances are positive and |rho| < 1.
  void validate() const;

  /// Scenario 1: single Gaussian, means 0/0, variances 0.5/1.0, rho -0.42.
  static ErrorScenario single_gaussian();
  /// Scenario 2: three-component Gaussian mixture with proportions 0.5/0.3/0.2.
  static ErrorScenario gaussian_mixture();
  /// 1 or 2; throws InputError otherwise.
  static ErrorScenario by_id(int id);
};

/// Coefficients of the reduced-form generating model
///   X = alpha1'Z + alpha2'D + xi1,  Y = beta1 X + beta2'D + xi2.
struct TrueParams {
  Eigen::VectorXd alpha1;
  Eigen::VectorXd alpha2;
  double beta1 = 1.0;
  Eigen::VectorXd beta2;

  /// alpha1 = (0.5, 0.5), alpha2 = (0.3, 0.3), beta1 = 1, beta2 = (0.5, 0.5).
  static TrueParams defaults();
  std::size_t q() const noexcept { return static_cast<std::size_t>(alpha1.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(alpha2.size()); }
};

struct SimConfig {
  std::size_t n = 1000;
  double censor_rate = 0.25;  // target censoring proportion, in [0, 1)
  ErrorScenario scenario = ErrorScenario::single_gaussian();
  TrueParams params = TrueParams::defaults();
  std::uint64_t seed = 1;
  std::size_t calibration_pop = 100000;
  double instrument_sd = 0.8;  // Z ~ N(0, sd^2 I)
  double confounder_sd = 1.0;  // D ~ N(0, sd^2 I)

  void validate() const;
  /// Hash of everything that determines the censoring calibration (n excluded).
  std::uint64_t calibration_key() const;
};

/// Censoring law C ~ N(mu, sigma_c^2). mu = +inf disables censoring.
struct Calibration {
  double mu = std::numeric_limits<double>::infinity();
  double sigma_c = 0.0;
  double achieved_fraction = 0.0;  // population censoring fraction at mu

  bool censoring_disabled() const noexcept { return mu == std::numeric_limits<double>::infinity(); }
};

struct OracleTruth {
  Eigen::VectorXd y_true;  // uncensored log event times
  Eigen::VectorXd c_true;  // log censoring times (+inf when disabled)
  double beta1_true = 1.0;
};

struct GeneratedData {
  CensoredSample sample;
  OracleTruth oracle;
  Calibration calibration;
};

/// Bisection tolerance on the population censoring fraction.
inline constexpr double kCalibrationTolerance = 1e-4;

std::pair<double, double> draw_errors(const ErrorScenario& scenario, Rng& rng);

/// Draws `calibration_pop` log event times, sets sigma_c to their standard
/// deviation and bisects mu until the share of population draws with
/// Y > mu + sigma_c r (r standard normal, paired per draw) is within
/// kCalibrationTolerance of the target.
Calibration calibrate_censoring(const SimConfig& config, Rng& rng);

/// Calibration for `config`, computed once per calibration_key() from a
/// stream derived from config.seed and cached process-wide.
Calibration cached_calibration(const SimConfig& config);

GeneratedData generate_dataset(const SimConfig& config, const Calibration& calibration, Rng& rng);
GeneratedData generate_dataset(const SimConfig& config, Rng& rng);

/// Stream id used for calibration draws: derive_seed(config.seed, kCalibrationStream).
inline constexpr std::uint64_t kCalibrationStream = 0xCA11B7A7E5EEDULL;

}  // namespace ctsls
