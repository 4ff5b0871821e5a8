#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ctsls/dataset.hpp"
#include "ctsls/km.hpp"
#include "ctsls/parameters.hpp"
#include "ctsls/synthetic.hpp"

namespace ctsls {

/// Per-subject estimating-function contributions at a fitted theta.
struct ScoreContribs {
  Eigen::MatrixXd psi1;       // n x (1+q+p)
  Eigen::MatrixXd psi2;       // n x (2+p)
  Eigen::MatrixXd psi2_star;  // n x (2+p), correction for estimating G
};

struct SandwichParts {
  Eigen::MatrixXd a_hat;
  Eigen::MatrixXd b_hat;
  Eigen::MatrixXd covariance;  // A^-1 B A^-T / n
  double a_condition = 0.0;
};

struct WaldInference {
  Eigen::VectorXd std_errors;
  std::vector<std::pair<double, double>> conf_intervals;
  Eigen::VectorXd p_values;
};

/// Martingale correction rows for the estimated censoring distribution.
///
/// For each distinct censoring time s,
///   h(s) = sum_i a_i 1{s < t_i} int_s^{t_i-} dt / (1 - G(t)) / Y(s),
/// where a_i is row i of `weighted_v` (omega_i * v_i) and Y(s) = #{t_j >= s};
/// then row j is sum_s h(s) (dN_j(s) - Y_j(s) dN(s) / Y(s)). Integrals are
/// clipped at G's integration limit. Cost O(n log n + n k).
Eigen::MatrixXd censoring_martingale_scores(std::span<const double> times,
                                            std::span<const std::uint8_t> events,
                                            const StepDistribution& G,
                                            const Eigen::MatrixXd& weighted_v);

ScoreContribs score_contributions(const CensoredSample& sample, const ParameterVector& theta,
                                  const StepDistribution& G, const SyntheticOutcome& synthetic,
                                  const WeightVector& weights);

/// Minus the Jacobian of the stacked estimating equations over n, with the
/// weights held fixed. The (stage-1, beta) block is exactly zero.
Eigen::MatrixXd assemble_a_hat(const CensoredSample& sample, const ParameterVector& theta,
                               const SyntheticOutcome& synthetic, const WeightVector& weights);

/// (1/n) sum_j s_j s_j' with s_j = [psi1_j; psi2_j + psi2_star_j].
Eigen::MatrixXd assemble_b_hat(const ScoreContribs& contribs);

/// Condition numbers above this make A-hat count as singular.
inline constexpr double kMaxCondition = 1e14;

/// A^-1 B A^-T / n, symmetrised. Throws NumericalError on a singular A.
SandwichParts sandwich(const Eigen::MatrixXd& a_hat, const Eigen::MatrixXd& b_hat, std::size_t n);

/// Wald standard errors, two-sided normal intervals and p-values.
WaldInference wald_inference(const Eigen::VectorXd& theta, const Eigen::MatrixXd& covariance,
                             double level = 0.95);

/// Standard-normal quantile.
double normal_quantile(double p);

}  // namespace ctsls
