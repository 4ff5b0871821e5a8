#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace ctsls {

class CensoredSample;

/// Lower bound applied to 1 - G(t) in every hazard-ratio integrand. Pieces of
/// positive length inside the integration domain with 1 - G below this bound
/// raise NumericalError instead of producing a huge finite number.
inline constexpr double kClampEpsilon = 1e-8;

/// Right-continuous, piecewise-constant distribution function.
///
/// The CDF is 0 below `jump_times()[0]` and equals `cdf_values()[k]` on
/// [jump_times()[k], jump_times()[k+1]). `integration_limit()` is the point
/// beyond which hazard-ratio integrands are treated as zero (the tail
/// truncation used when the largest observation is censored); it is +inf
/// when no truncation applies.
class StepDistribution {
 public:
  StepDistribution() = default;
  StepDistribution(std::vector<double> jump_times, std::vector<double> cdf_values,
                   double integration_limit = std::numeric_limits<double>::infinity());

  /// The distribution that is identically zero (no censoring).
  static StepDistribution zero() { return {}; }

  const std::vector<double>& jump_times() const noexcept { return jump_times_; }
  const std::vector<double>& cdf_values() const noexcept { return cdf_values_; }
  double integration_limit() const noexcept { return integration_limit_; }

  bool is_zero() const noexcept { return jump_times_.empty(); }
  std::size_t size() const noexcept { return jump_times_.size(); }

  /// G(t): right-continuous value.
  double operator()(double t) const noexcept;
  /// G(t-): value on the piece strictly below t.
  double left_limit(double t) const noexcept;
  /// G^{-1}(0): the largest t with G(t) = 0 on the left, i.e. the first jump.
  /// +inf for the zero distribution.
  double support_floor() const noexcept;

  /// Probability masses at each jump (increments of the CDF).
  std::vector<double> masses() const;

  /// Copy whose last value is raised to 1: mass beyond the last jump is
  /// assigned to the last jump (restricted-moment convention for improper
  /// product-limit curves).
  StepDistribution completed() const;

  /// Mean and variance of the completed distribution.
  double mean() const;
  double variance() const;

 private:
  std::vector<double> jump_times_;
  std::vector<double> cdf_values_;
  double integration_limit_ = std::numeric_limits<double>::infinity();
};

/// Product-limit estimate of the censoring distribution from (time, 1 - event).
///
/// Ties: events precede censorings, so subjects with an event at t stay in
/// the risk set of a censoring at t. The integration limit is set to the
/// largest event time.
StepDistribution km_censoring(std::span<const double> times, std::span<const std::uint8_t> events);
StepDistribution km_censoring(const CensoredSample& sample);

/// Product-limit CDF with event = 1 as the event of interest. Needs at least
/// one event. The result may be improper (last value < 1) when the largest
/// value is censored.
StepDistribution km_event(std::span<const double> values, std::span<const std::uint8_t> events);

/// Exact value of the integral of G(t-)/(1-G(t-)) over (-inf, min(upper, limit)).
double integrate_hazard_ratio(const StepDistribution& G, double upper);

/// Precomputed cumulative tables for repeated hazard-ratio integrals.
///
/// `operator()(u)` is K(u) = integral of G/(1-G) up to u (same value as
/// integrate_hazard_ratio); `double_integral(u)` is L(u) = integral of K up
/// to u. Both are exact for the piecewise-constant integrand.
class HazardRatioIntegral {
 public:
  explicit HazardRatioIntegral(const StepDistribution& G);

  double operator()(double upper) const;
  double double_integral(double upper) const;

  /// Breakpoints of K (jumps below the limit, then the limit if finite).
  const std::vector<double>& knots() const noexcept { return knots_; }
  /// First u beyond which the integrand is unusable (1 - G < epsilon).
  double guard_start() const noexcept { return guard_start_; }

 private:
  friend class HazardRatioCursor;
  std::size_t piece(double u) const noexcept;

  std::vector<double> knots_;
  std::vector<double> slope_;   // integrand on [knots_[k], knots_[k+1])
  std::vector<double> k_at_;    // K(knots_[k])
  std::vector<double> l_at_;    // L(knots_[k])
  double guard_start_ = std::numeric_limits<double>::infinity();
};

/// Evaluates L(u) for a non-decreasing sequence of u in amortised O(1).
class HazardRatioCursor {
 public:
  explicit HazardRatioCursor(const HazardRatioIntegral& table) : table_(&table) {}
  double double_integral(double upper);
  void reset() noexcept { index_ = 0; }

 private:
  const HazardRatioIntegral* table_;
  std::size_t index_ = 0;
};

/// Exact integrals of 1/(1 - G(t)) over sub-intervals of (-inf, limit].
/// Interval ends above the integration limit are clipped to it.
class InverseSurvivalIntegral {
 public:
  explicit InverseSurvivalIntegral(const StepDistribution& G);

  /// Integral over [a, b) after clipping both ends to the limit; 0 if b <= a.
  double between(double a, double b) const;

  /// Antiderivative evaluated at min(u, limit), anchored at the first jump.
  /// between(a, b) == clipped(b) - clipped(a) whenever b > a.
  double clipped(double u) const { return antiderivative(u < limit_ ? u : limit_); }

 private:
  double antiderivative(double u) const;

  std::vector<double> knots_;
  std::vector<double> slope_;
  std::vector<double> r_at_;
  double limit_ = std::numeric_limits<double>::infinity();
  double guard_start_ = std::numeric_limits<double>::infinity();
};

}  // namespace ctsls
