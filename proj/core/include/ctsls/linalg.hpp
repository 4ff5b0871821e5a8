#pragma once

#include <Eigen/Dense>

namespace ctsls {

/// Relative pivot threshold below which a design column counts as dependent.
inline constexpr double kRankTolerance = 1e-10;

/// Minimises sum_i w_i (y_i - x_i' b)^2 by a column-pivoted Householder QR of
/// the row-scaled design diag(sqrt(w)) X. Throws RankDeficientError listing
/// the dependent columns when the scaled design is not of full column rank.
Eigen::VectorXd solve_weighted_ls(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                  const Eigen::VectorXd& weights);

/// 2-norm condition number (ratio of extreme singular values); +inf if singular.
double condition_number(const Eigen::MatrixXd& m);

}  // namespace ctsls
