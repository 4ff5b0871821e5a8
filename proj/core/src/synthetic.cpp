#include "ctsls/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ctsls/dataset.hpp"
#include "ctsls/error.hpp"

namespace ctsls {

namespace {

void require_positive_variance(double var_y) {
  if (!(var_y > 0.0) || !std::isfinite(var_y))
    throw NumericalError(fmt::format("outcome variance must be positive and finite (got {:g})", var_y));
}

struct CompletedJumps {
  std::vector<double> values;
  std::vector<double> masses;
};

CompletedJumps completed_jumps(const StepDistribution& F) {
  if (F.is_zero()) throw NumericalError("residual distribution has no jumps");
  const auto full = F.completed();
  CompletedJumps out;
  const auto m = full.masses();
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m[k] <= 0.0) continue;
    out.values.push_back(full.jump_times()[k]);
    out.masses.push_back(m[k]);
  }
  return out;
}

double excess_variance(double mu_y, const CompletedJumps& F, const HazardRatioIntegral& K) {
  const auto& knots = K.knots();
  if (knots.empty()) return 0.0;
  // Jumps with mu_y + r_k at or below the first knot contribute L = 0.
  const double floor = knots.front() - mu_y;
  auto k = static_cast<std::size_t>(
      std::upper_bound(F.values.begin(), F.values.end(), floor) - F.values.begin());
  HazardRatioCursor cursor(K);
  double acc = 0.0;
  for (; k < F.values.size(); ++k) acc += F.masses[k] * cursor.double_integral(mu_y + F.values[k]);
  return 2.0 * acc;
}

}  // namespace

SyntheticOutcome leurgans_transform(std::span<const double> log_times, const StepDistribution& G) {
  const HazardRatioIntegral K(G);
  SyntheticOutcome out;
  out.values.resize(static_cast<Eigen::Index>(log_times.size()));
  for (std::size_t i = 0; i < log_times.size(); ++i) {
    const double y = log_times[i];
    out.values[static_cast<Eigen::Index>(i)] = y + K(y);
    if (y > G.integration_limit() && !K.knots().empty()) ++out.truncated;
  }
  out.generator = G;
  return out;
}

SyntheticOutcome leurgans_transform(const CensoredSample& sample, const StepDistribution& G) {
  return leurgans_transform(sample.log_time_span(), G);
}

double synthetic_variance(double mu_y, const StepDistribution& F, const StepDistribution& G,
                          double var_y) {
  require_positive_variance(var_y);
  const HazardRatioIntegral K(G);
  return var_y + excess_variance(mu_y, completed_jumps(F), K);
}

WeightVector compute_weights(const StepDistribution& G, const StepDistribution& F_residual,
                             std::span<const double> mu_y, double var_y) {
  require_positive_variance(var_y);
  const HazardRatioIntegral K(G);
  const auto F = completed_jumps(F_residual);
  WeightVector w;
  w.values.resize(static_cast<Eigen::Index>(mu_y.size()));
  for (std::size_t i = 0; i < mu_y.size(); ++i) {
    const double v = var_y + excess_variance(mu_y[i], F, K);
    if (!std::isfinite(v)) throw NumericalError(fmt::format("non-finite Var(Y*) for subject {}", i + 1));
    w.values[static_cast<Eigen::Index>(i)] = 1.0 / v;
  }
  return w;
}

}  // namespace ctsls
