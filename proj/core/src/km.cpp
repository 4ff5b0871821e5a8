#include "ctsls/km.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "ctsls/dataset.hpp"
#include "ctsls/error.hpp"

namespace ctsls {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct TimedEvent {
  double time;
  std::uint8_t event;
};

std::vector<TimedEvent> sorted_pairs(std::span<const double> times,
                                     std::span<const std::uint8_t> events) {
  if (times.size() != events.size())
    throw InputError(fmt::format("time/event lengths differ ({} vs {})", times.size(), events.size()));
  std::vector<TimedEvent> pairs(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) pairs[i] = {times[i], events[i]};
  std::sort(pairs.begin(), pairs.end(),
            [](const TimedEvent& a, const TimedEvent& b) { return a.time < b.time; });
  return pairs;
}

// Product-limit CDF of the rows whose flag equals `target`; the risk set at
// t counts every row with time >= t.
std::pair<std::vector<double>, std::vector<double>> product_limit(
    const std::vector<TimedEvent>& pairs, std::uint8_t target) {
  std::vector<double> jumps, cdf;
  double survival = 1.0;
  std::size_t at_risk = pairs.size();
  std::size_t i = 0;
  while (i < pairs.size()) {
    const double t = pairs[i].time;
    std::size_t hits = 0, tied = 0;
    while (i < pairs.size() && pairs[i].time == t) {
      if (pairs[i].event == target) ++hits;
      ++tied;
      ++i;
    }
    if (hits > 0) {
      survival *= 1.0 - static_cast<double>(hits) / static_cast<double>(at_risk);
      jumps.push_back(t);
      cdf.push_back(1.0 - survival);
    }
    at_risk -= tied;
  }
  return {std::move(jumps), std::move(cdf)};
}

double hazard_slope(double c) { return c / (1.0 - c); }

}  // namespace

StepDistribution::StepDistribution(std::vector<double> jump_times, std::vector<double> cdf_values,
                                   double integration_limit)
    : jump_times_(std::move(jump_times)),
      cdf_values_(std::move(cdf_values)),
      integration_limit_(integration_limit) {
  if (jump_times_.size() != cdf_values_.size())
    throw NumericalError("StepDistribution: jump/value lengths differ");
  for (std::size_t k = 0; k < jump_times_.size(); ++k) {
    if (!std::isfinite(jump_times_[k])) throw NumericalError("StepDistribution: non-finite jump");
    if (k > 0 && !(jump_times_[k] > jump_times_[k - 1]))
      throw NumericalError("StepDistribution: jump times must be strictly increasing");
    const double c = cdf_values_[k];
    if (!(c >= 0.0 && c <= 1.0)) throw NumericalError("StepDistribution: value outside [0,1]");
    if (k > 0 && c < cdf_values_[k - 1])
      throw NumericalError("StepDistribution: values must be non-decreasing");
  }
}

double StepDistribution::operator()(double t) const noexcept {
  const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
  if (it == jump_times_.begin()) return 0.0;
  return cdf_values_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
}

double StepDistribution::left_limit(double t) const noexcept {
  const auto it = std::lower_bound(jump_times_.begin(), jump_times_.end(), t);
  if (it == jump_times_.begin()) return 0.0;
  return cdf_values_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
}

double StepDistribution::support_floor() const noexcept {
  for (std::size_t k = 0; k < jump_times_.size(); ++k)
    if (cdf_values_[k] > 0.0) return jump_times_[k];
  return kInf;
}

std::vector<double> StepDistribution::masses() const {
  std::vector<double> m(cdf_values_.size());
  std::adjacent_difference(cdf_values_.begin(), cdf_values_.end(), m.begin());
  return m;
}

StepDistribution StepDistribution::completed() const {
  if (jump_times_.empty()) throw NumericalError("cannot complete a distribution without jumps");
  auto values = cdf_values_;
  values.back() = 1.0;
  return {jump_times_, std::move(values), integration_limit_};
}

double StepDistribution::mean() const {
  const auto full = completed();
  const auto m = full.masses();
  double mu = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) mu += m[k] * jump_times_[k];
  return mu;
}

double StepDistribution::variance() const {
  const auto full = completed();
  const auto m = full.masses();
  const double mu = mean();
  double v = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double d = jump_times_[k] - mu;
    v += m[k] * d * d;
  }
  return v;
}

StepDistribution km_censoring(std::span<const double> times, std::span<const std::uint8_t> events) {
  if (times.empty()) throw InputError("km_censoring: empty sample");
  const auto pairs = sorted_pairs(times, events);
  auto [jumps, cdf] = product_limit(pairs, 0);
  double last_event = kInf;
  for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) {
    if (it->event == 1) {
      last_event = it->time;
      break;
    }
  }
  return {std::move(jumps), std::move(cdf), last_event};
}

StepDistribution km_censoring(const CensoredSample& sample) {
  return km_censoring(sample.log_time_span(), sample.event());
}

StepDistribution km_event(std::span<const double> values, std::span<const std::uint8_t> events) {
  if (std::none_of(events.begin(), events.end(), [](std::uint8_t e) { return e == 1; }))
    throw InputError("km_event: zero events");
  const auto pairs = sorted_pairs(values, events);
  auto [jumps, cdf] = product_limit(pairs, 1);
  return {std::move(jumps), std::move(cdf)};
}

double integrate_hazard_ratio(const StepDistribution& G, double upper) {
  const double limit = std::min(upper, G.integration_limit());
  const auto& t = G.jump_times();
  const auto& c = G.cdf_values();
  double total = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double lo = t[k];
    const double hi = std::min(limit, k + 1 < t.size() ? t[k + 1] : kInf);
    if (!(hi > lo) || c[k] == 0.0) continue;
    if (1.0 - c[k] < kClampEpsilon)
      throw NumericalError(fmt::format(
          "hazard-ratio integrand diverges: 1 - G < {:g} on [{:.17g}, {:.17g})", kClampEpsilon, lo, hi));
    if (std::isinf(hi))
      throw NumericalError("hazard-ratio integral over an unbounded piece with G > 0");
    total += (hi - lo) * hazard_slope(c[k]);
  }
  return total;
}

HazardRatioIntegral::HazardRatioIntegral(const StepDistribution& G) {
  const auto& t = G.jump_times();
  const auto& c = G.cdf_values();
  const double limit = G.integration_limit();
  for (std::size_t k = 0; k < t.size() && t[k] < limit; ++k) {
    knots_.push_back(t[k]);
    if (1.0 - c[k] < kClampEpsilon) {
      // Unusable beyond this knot unless the next knot arrives first with
      // zero length in between, which strict ordering rules out.
      slope_.push_back(0.0);
      guard_start_ = std::min(guard_start_, t[k]);
    } else {
      slope_.push_back(hazard_slope(c[k]));
    }
  }
  if (std::isfinite(limit) && !knots_.empty()) {
    knots_.push_back(limit);
    slope_.push_back(0.0);
  }
  k_at_.assign(knots_.size(), 0.0);
  l_at_.assign(knots_.size(), 0.0);
  for (std::size_t k = 1; k < knots_.size(); ++k) {
    const double w = knots_[k] - knots_[k - 1];
    k_at_[k] = k_at_[k - 1] + slope_[k - 1] * w;
    l_at_[k] = l_at_[k - 1] + k_at_[k - 1] * w + 0.5 * slope_[k - 1] * w * w;
  }
}

std::size_t HazardRatioIntegral::piece(double u) const noexcept {
  return static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), u) -
                                  knots_.begin()) - 1;
}

double HazardRatioIntegral::operator()(double upper) const {
  if (knots_.empty() || upper <= knots_.front()) return 0.0;
  if (upper > guard_start_)
    throw NumericalError(fmt::format("hazard-ratio integrand diverges beyond {:.17g}", guard_start_));
  const auto k = piece(upper);
  return k_at_[k] + slope_[k] * (upper - knots_[k]);
}

double HazardRatioIntegral::double_integral(double upper) const {
  if (knots_.empty() || upper <= knots_.front()) return 0.0;
  if (upper > guard_start_)
    throw NumericalError(fmt::format("hazard-ratio integrand diverges beyond {:.17g}", guard_start_));
  const auto k = piece(upper);
  const double d = upper - knots_[k];
  return l_at_[k] + k_at_[k] * d + 0.5 * slope_[k] * d * d;
}

double HazardRatioCursor::double_integral(double upper) {
  const auto& knots = table_->knots_;
  if (knots.empty() || upper <= knots.front()) return 0.0;
  if (upper > table_->guard_start_)
    throw NumericalError(
        fmt::format("hazard-ratio integrand diverges beyond {:.17g}", table_->guard_start_));
  while (index_ + 1 < knots.size() && knots[index_ + 1] <= upper) ++index_;
  const double d = upper - knots[index_];
  return table_->l_at_[index_] + table_->k_at_[index_] * d + 0.5 * table_->slope_[index_] * d * d;
}

InverseSurvivalIntegral::InverseSurvivalIntegral(const StepDistribution& G)
    : limit_(G.integration_limit()) {
  const auto& t = G.jump_times();
  const auto& c = G.cdf_values();
  for (std::size_t k = 0; k < t.size() && t[k] < limit_; ++k) {
    knots_.push_back(t[k]);
    if (1.0 - c[k] < kClampEpsilon) {
      slope_.push_back(0.0);
      guard_start_ = std::min(guard_start_, t[k]);
    } else {
      slope_.push_back(1.0 / (1.0 - c[k]));
    }
  }
  r_at_.assign(knots_.size(), 0.0);
  for (std::size_t k = 1; k < knots_.size(); ++k)
    r_at_[k] = r_at_[k - 1] + slope_[k - 1] * (knots_[k] - knots_[k - 1]);
}

double InverseSurvivalIntegral::antiderivative(double u) const {
  // Anchored at the first knot (or 0 without knots); slope 1 below it.
  if (knots_.empty()) return u;
  if (u <= knots_.front()) return u - knots_.front();
  if (u > guard_start_)
    throw NumericalError(fmt::format("1/(1-G) integrand diverges beyond {:.17g}", guard_start_));
  const auto k = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), u) -
                                          knots_.begin()) - 1;
  return r_at_[k] + slope_[k] * (u - knots_[k]);
}

double InverseSurvivalIntegral::between(double a, double b) const {
  a = std::min(a, limit_);
  b = std::min(b, limit_);
  if (!(b > a)) return 0.0;
  return antiderivative(b) - antiderivative(a);
}

}  // namespace ctsls
