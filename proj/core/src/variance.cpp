#include "ctsls/variance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "ctsls/design.hpp"
#include "ctsls/error.hpp"
#include "ctsls/linalg.hpp"

namespace ctsls {

Eigen::MatrixXd censoring_martingale_scores(std::span<const double> times,
                                            std::span<const std::uint8_t> events,
                                            const StepDistribution& G,
                                            const Eigen::MatrixXd& weighted_v) {
  const auto n = times.size();
  const auto k = weighted_v.cols();
  if (events.size() != n || static_cast<std::size_t>(weighted_v.rows()) != n)
    throw NumericalError("censoring_martingale_scores: inconsistent lengths");

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), k);
  if (std::all_of(events.begin(), events.end(), [](std::uint8_t e) { return e == 1; })) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  // Distinct censoring times with dN(s) and Y(s).
  std::vector<double> s_time;
  std::vector<double> s_dn;
  std::vector<double> s_risk;
  for (std::size_t pos = 0; pos < n;) {
    const double t = times[order[pos]];
    std::size_t end = pos;
    std::size_t censored = 0;
    while (end < n && times[order[end]] == t) {
      if (events[order[end]] == 0) ++censored;
      ++end;
    }
    if (censored > 0) {
      s_time.push_back(t);
      s_dn.push_back(static_cast<double>(censored));
      s_risk.push_back(static_cast<double>(n - pos));
    }
    pos = end;
  }
  const auto m = s_time.size();

  // h(s) via suffix sums over subjects with t_i > s:
  //   numerator = sum a_i R(t_i) - R(s) sum a_i, with R the clipped antiderivative.
  const InverseSurvivalIntegral inv(G);
  Eigen::MatrixXd h(static_cast<Eigen::Index>(m), k);
  {
    Eigen::RowVectorXd sum_a = Eigen::RowVectorXd::Zero(k);
    Eigen::RowVectorXd sum_ar = Eigen::RowVectorXd::Zero(k);
    std::size_t pos = n;  // subjects order[pos..n) have t > current s
    for (std::size_t c = m; c-- > 0;) {
      const double s = s_time[c];
      while (pos > 0 && times[order[pos - 1]] > s) {
        --pos;
        const auto i = static_cast<Eigen::Index>(order[pos]);
        sum_a += weighted_v.row(i);
        sum_ar += weighted_v.row(i) * inv.clipped(times[order[pos]]);
      }
      h.row(static_cast<Eigen::Index>(c)) = (sum_ar - sum_a * inv.clipped(s)) / s_risk[c];
    }
  }

  // Compensator cumulative sum C(t) = sum_{s <= t} h(s) dN(s) / Y(s).
  Eigen::MatrixXd cumulative(static_cast<Eigen::Index>(m), k);
  Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(k);
  for (std::size_t c = 0; c < m; ++c) {
    running += h.row(static_cast<Eigen::Index>(c)) * (s_dn[c] / s_risk[c]);
    cumulative.row(static_cast<Eigen::Index>(c)) = running;
  }

  for (std::size_t j = 0; j < n; ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    const auto it = std::upper_bound(s_time.begin(), s_time.end(), times[j]);
    const auto last = it - s_time.begin();  // number of censoring times <= t_j
    if (last > 0) out.row(row) -= cumulative.row(last - 1);
    if (events[j] == 0) out.row(row) += h.row(last - 1);  // s = t_j is a censoring time
  }
  return out;
}

namespace {

struct FittedPieces {
  Eigen::MatrixXd w1;        // [1, Z, D]
  Eigen::VectorXd mu_x;
  Eigen::MatrixXd v;         // [1, mu_X, D]
  Eigen::VectorXd mu_y;
};

FittedPieces fitted_pieces(const CensoredSample& sample, const ParameterVector& theta) {
  if (theta.q() != sample.q() || theta.p() != sample.p())
    throw NumericalError("parameter dimensions do not match the sample");
  FittedPieces f;
  f.w1 = stage1_design(sample);
  f.mu_x = f.w1 * theta.alpha();
  f.v = stage2_design(f.mu_x, sample.confounders());
  f.mu_y = f.v * theta.beta();
  return f;
}

void check_lengths(const CensoredSample& sample, const SyntheticOutcome& synthetic,
                   const WeightVector& weights) {
  const auto n = static_cast<Eigen::Index>(sample.n());
  if (synthetic.values.size() != n || weights.values.size() != n)
    throw NumericalError("synthetic outcome / weight lengths do not match the sample");
}

}  // namespace

ScoreContribs score_contributions(const CensoredSample& sample, const ParameterVector& theta,
                                  const StepDistribution& G, const SyntheticOutcome& synthetic,
                                  const WeightVector& weights) {
  check_lengths(sample, synthetic, weights);
  const auto f = fitted_pieces(sample, theta);
  const Eigen::VectorXd& w = weights.values;

  ScoreContribs out;
  out.psi1 = (sample.exposure() - f.mu_x).asDiagonal() * f.w1;
  const Eigen::MatrixXd weighted_v = w.asDiagonal() * f.v;
  out.psi2 = (synthetic.values - f.mu_y).asDiagonal() * weighted_v;
  out.psi2_star = censoring_martingale_scores(sample.log_time_span(), sample.event(), G, weighted_v);
  return out;
}

Eigen::MatrixXd assemble_a_hat(const CensoredSample& sample, const ParameterVector& theta,
                               const SyntheticOutcome& synthetic, const WeightVector& weights) {
  check_lengths(sample, synthetic, weights);
  const auto f = fitted_pieces(sample, theta);
  const Eigen::VectorXd& w = weights.values;
  const auto n = static_cast<double>(sample.n());
  const auto s1 = f.w1.cols();
  const auto s2 = f.v.cols();

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(s1 + s2, s1 + s2);
  a.topLeftCorner(s1, s1) = f.w1.transpose() * f.w1 / n;

  // Left factor rows: omega_i [beta1, beta1 mu_X + mu_Y - Y*, beta1 D].
  Eigen::MatrixXd left(f.v.rows(), s2);
  left.col(0).setConstant(theta.beta1);
  left.col(1) = theta.beta1 * f.mu_x + f.mu_y - synthetic.values;
  left.rightCols(s2 - 2) = theta.beta1 * sample.confounders();
  a.bottomLeftCorner(s2, s1) = (w.asDiagonal() * left).transpose() * f.w1 / n;
  a.bottomRightCorner(s2, s2) = f.v.transpose() * w.asDiagonal() * f.v / n;
  return a;
}

Eigen::MatrixXd assemble_b_hat(const ScoreContribs& contribs) {
  const auto n = contribs.psi1.rows();
  const auto s1 = contribs.psi1.cols();
  const auto s2 = contribs.psi2.cols();
  Eigen::MatrixXd stacked(n, s1 + s2);
  stacked.leftCols(s1) = contribs.psi1;
  stacked.rightCols(s2) = contribs.psi2 + contribs.psi2_star;
  Eigen::MatrixXd b = stacked.transpose() * stacked / static_cast<double>(n);
  return 0.5 * (b + b.transpose());
}

SandwichParts sandwich(const Eigen::MatrixXd& a_hat, const Eigen::MatrixXd& b_hat, std::size_t n) {
  SandwichParts out;
  out.a_hat = a_hat;
  out.b_hat = b_hat;
  out.a_condition = condition_number(a_hat);
  if (!(out.a_condition < kMaxCondition))
    throw NumericalError(fmt::format("A-hat is singular (condition number {:.3g})", out.a_condition));
  const Eigen::MatrixXd a_inv = a_hat.partialPivLu().inverse();
  Eigen::MatrixXd cov = a_inv * b_hat * a_inv.transpose() / static_cast<double>(n);
  out.covariance = 0.5 * (cov + cov.transpose());
  return out;
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

WaldInference wald_inference(const Eigen::VectorXd& theta, const Eigen::MatrixXd& covariance,
                             double level) {
  if (!(level > 0.0 && level < 1.0)) throw NumericalError(fmt::format("confidence level {} not in (0,1)", level));
  const auto k = theta.size();
  if (covariance.rows() != k || covariance.cols() != k)
    throw NumericalError("covariance dimension does not match theta");
  const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
  WaldInference out;
  out.std_errors.resize(k);
  out.p_values.resize(k);
  out.conf_intervals.resize(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    const double var = covariance(i, i);
    if (!(var >= 0.0))
      throw NumericalError(fmt::format("negative variance {:g} at index {}", var, i));
    const double se = std::sqrt(var);
    out.std_errors[i] = se;
    out.conf_intervals[static_cast<std::size_t>(i)] = {theta[i] - z * se, theta[i] + z * se};
    if (se == 0.0) {
      out.p_values[i] = theta[i] == 0.0 ? 1.0 : 0.0;
    } else {
      out.p_values[i] = std::erfc(std::abs(theta[i] / se) / std::sqrt(2.0));
    }
  }
  return out;
}

}  // namespace ctsls
