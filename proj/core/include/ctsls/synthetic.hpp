#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "ctsls/km.hpp"

namespace ctsls {

class CensoredSample;

/// Leurgans synthetic outcomes Y*_i = Y~_i + K(Y~_i) together with the
/// censoring distribution that generated them.
struct SyntheticOutcome {
  Eigen::VectorXd values;
  StepDistribution generator;
  /// Subjects whose integral was cut at the generator's integration limit.
  std::size_t truncated = 0;
};

/// Subject-specific weights 1 / Var(Y*_i). Not normalised.
struct WeightVector {
  Eigen::VectorXd values;

  static WeightVector constant(std::size_t n, double value = 1.0) {
    return {Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), value)};
  }
};

SyntheticOutcome leurgans_transform(std::span<const double> log_times, const StepDistribution& G);
SyntheticOutcome leurgans_transform(const CensoredSample& sample, const StepDistribution& G);

/// Var(Y*) for a subject with linear predictor `mu_y`:
///
///   var_y + 2 * integral over s of {1 - F(s)} K(mu_y + s) ds,
///
/// with K the hazard-ratio integral of G and F completed at its last jump.
/// The outer integrand vanishes wherever K(mu_y + s) = 0, so the integral
/// effectively starts at G^{-1}(0) - mu_y; it ends at F's last jump. Evaluated
/// exactly as var_y + 2 * sum_k p_k L(mu_y + r_k), where (r_k, p_k) are F's
/// jumps and masses and L is the antiderivative of K.
double synthetic_variance(double mu_y, const StepDistribution& F, const StepDistribution& G,
                          double var_y);

WeightVector compute_weights(const StepDistribution& G, const StepDistribution& F_residual,
                             std::span<const double> mu_y, double var_y);

}  // namespace ctsls
