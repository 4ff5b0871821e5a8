#pragma once

#include <Eigen/Dense>

#include "ctsls/dataset.hpp"

namespace ctsls {

/// Stage-1 design [1, Z, D] (n x (1+q+p)).
inline Eigen::MatrixXd stage1_design(const CensoredSample& sample) {
  const auto n = static_cast<Eigen::Index>(sample.n());
  const auto q = static_cast<Eigen::Index>(sample.q());
  const auto p = static_cast<Eigen::Index>(sample.p());
  Eigen::MatrixXd w(n, 1 + q + p);
  w.col(0).setOnes();
  w.middleCols(1, q) = sample.instruments();
  w.rightCols(p) = sample.confounders();
  return w;
}

/// Stage-2 design [1, mu_X, D] (n x (2+p)).
inline Eigen::MatrixXd stage2_design(const Eigen::VectorXd& fitted_x, const Eigen::MatrixXd& confounders) {
  const auto n = fitted_x.size();
  const auto p = confounders.cols();
  Eigen::MatrixXd v(n, 2 + p);
  v.col(0).setOnes();
  v.col(1) = fitted_x;
  v.rightCols(p) = confounders;
  return v;
}

}  // namespace ctsls
