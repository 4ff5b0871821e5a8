#include "ctsls/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ctsls/error.hpp"

namespace ctsls {

Eigen::VectorXd solve_weighted_ls(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                  const Eigen::VectorXd& weights) {
  const auto n = design.rows();
  const auto k = design.cols();
  if (response.size() != n || weights.size() != n)
    throw InputError(fmt::format("weighted LS: design has {} rows, response {}, weights {}", n,
                                 response.size(), weights.size()));
  if (n < k) throw RankDeficientError(fmt::format("weighted LS: n={} < k={}", n, k), {});
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw NumericalError(fmt::format("weighted LS: weight {} is not positive and finite", i + 1));

  const Eigen::VectorXd root = weights.cwiseSqrt();
  const Eigen::MatrixXd scaled = root.asDiagonal() * design;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < k) {
    std::vector<std::size_t> deficient;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < k; ++j) deficient.push_back(static_cast<std::size_t>(perm[j]));
    std::sort(deficient.begin(), deficient.end());
    throw RankDeficientError(
        fmt::format("rank-deficient design (rank {} of {}); dependent columns {}", qr.rank(), k,
                    deficient),
        deficient);
  }
  return qr.solve(root.cwiseProduct(response));
}

double condition_number(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / smin;
}

}  // namespace ctsls
