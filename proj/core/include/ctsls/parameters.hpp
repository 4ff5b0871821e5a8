#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ctsls {

/// Stacked coefficients of both stages,
/// theta = (alpha0, alpha1[q], alpha2[p], beta0, beta1, beta2[p]).
struct ParameterVector {
  double alpha0 = 0.0;
  Eigen::VectorXd alpha1;  // instruments, length q
  Eigen::VectorXd alpha2;  // confounders in stage 1, length p
  double beta0 = 0.0;
  double beta1 = 0.0;      // causal effect of the exposure
  Eigen::VectorXd beta2;   // confounders in stage 2, length p

  std::size_t q() const noexcept { return static_cast<std::size_t>(alpha1.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(alpha2.size()); }

  static std::size_t stage1_dim(std::size_t q, std::size_t p) { return 1 + q + p; }
  static std::size_t stage2_dim(std::size_t p) { return 2 + p; }
  static std::size_t dim(std::size_t q, std::size_t p) { return stage1_dim(q, p) + stage2_dim(p); }
  /// Position of beta1 in the stacked vector.
  static std::size_t beta1_index(std::size_t q, std::size_t p) { return stage1_dim(q, p) + 1; }

  Eigen::VectorXd alpha() const;  // (alpha0, alpha1, alpha2)
  Eigen::VectorXd beta() const;   // (beta0, beta1, beta2)
  Eigen::VectorXd stacked() const;

  static ParameterVector from_blocks(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                                     std::size_t q, std::size_t p);
  static ParameterVector unstack(const Eigen::VectorXd& theta, std::size_t q, std::size_t p);

  /// alpha0, alpha1_1..q, alpha2_1..p, beta0, beta1, beta2_1..p
  static std::vector<std::string> names(std::size_t q, std::size_t p);
};

}  // namespace ctsls
