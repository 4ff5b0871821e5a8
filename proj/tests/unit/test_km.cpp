#include <gtest/gtest.h>

#include <random>

#include "ctsls/error.hpp"
#include "ctsls/km.hpp"
#include "oracles.hpp"

using namespace ctsls;

namespace {

std::vector<std::uint8_t> flags(std::initializer_list<int> v) { return {v.begin(), v.end()}; }

StepDistribution censoring(const std::vector<double>& t, const std::vector<std::uint8_t>& e) {
  return km_censoring(std::span<const double>(t), std::span<const std::uint8_t>(e));
}

}  // namespace

TEST(KmCensoring, NoCensoringGivesZeroDistribution) {
  const std::vector<double> t{1, 2, 3};
  const auto G = censoring(t, flags({1, 1, 1}));
  EXPECT_TRUE(G.is_zero());
  for (double u : {-5.0, 1.0, 2.5, 100.0}) {
    EXPECT_EQ(G(u), 0.0);
    EXPECT_EQ(integrate_hazard_ratio(G, u), 0.0);
  }
}

TEST(KmCensoring, HandFixtureSingleCensoring) {
  const std::vector<double> t{1, 2, 3};
  const auto G = censoring(t, flags({1, 0, 1}));
  EXPECT_EQ(G(1.999), 0.0);
  EXPECT_EQ(G(2.0), 0.5);
  EXPECT_EQ(G(10.0), 0.5);
  EXPECT_EQ(G.left_limit(2.0), 0.0);
  EXPECT_EQ(G.support_floor(), 2.0);
  EXPECT_EQ(G.integration_limit(), 3.0);
}

TEST(KmCensoring, AllCensoredReachesOne) {
  const std::vector<double> t{1, 2};
  const auto G = censoring(t, flags({0, 0}));
  EXPECT_EQ(G(0.5), 0.0);
  EXPECT_EQ(G(1.0), 0.5);
  EXPECT_EQ(G(1.5), 0.5);
  EXPECT_EQ(G(2.0), 1.0);
}

TEST(KmCensoring, EventsPrecedeCensoringsAtTies) {
  // Event and censoring at t=2: the event subject stays in the censoring risk set.
  const std::vector<double> t{1, 2, 2, 3};
  const auto G = censoring(t, flags({1, 1, 0, 1}));
  EXPECT_DOUBLE_EQ(G(2.0), 1.0 / 3.0);
}

TEST(KmCensoring, EmptyInputThrows) {
  const std::vector<double> t;
  EXPECT_THROW(censoring(t, {}), Error);
}

TEST(KmEvent, UncensoredEqualsEcdf) {
  const std::vector<double> v{0.1, 0.5, 0.9};
  const auto F = km_event(v, flags({1, 1, 1}));
  EXPECT_DOUBLE_EQ(F(0.1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(F(0.5), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(F(0.9), 1.0);
  EXPECT_EQ(F(0.05), 0.0);
}

TEST(KmEvent, CensoredPointRedistributesRight) {
  const std::vector<double> v{1, 2, 3};
  const auto F = km_event(v, flags({1, 0, 1}));
  EXPECT_DOUBLE_EQ(F(1.0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(F(2.5), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(F(3.0), 1.0);
}

TEST(KmEvent, SingleEvent) {
  const std::vector<double> v{0.0};
  const auto F = km_event(v, flags({1}));
  EXPECT_EQ(F(-1e-12), 0.0);
  EXPECT_EQ(F(0.0), 1.0);
}

TEST(KmEvent, ZeroEventsThrows) {
  const std::vector<double> v{1, 2};
  EXPECT_THROW(km_event(v, flags({0, 0})), InputError);
}

TEST(KmEvent, UncensoredRandomEqualsEcdfExactly) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> norm;
  std::vector<double> v(57);
  for (auto& x : v) x = norm(gen);
  const auto F = km_event(v, std::vector<std::uint8_t>(v.size(), 1));
  for (double x : v) {
    const auto below = std::count_if(v.begin(), v.end(), [&](double y) { return y <= x; });
    EXPECT_NEAR(F(x), static_cast<double>(below) / static_cast<double>(v.size()), 1e-14);
  }
}

TEST(HazardRatio, HandFixtureIntegrals) {
  const std::vector<double> t{1, 2, 3};
  const auto G = censoring(t, flags({1, 0, 1}));
  EXPECT_DOUBLE_EQ(integrate_hazard_ratio(G, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(integrate_hazard_ratio(G, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(integrate_hazard_ratio(G, 1.0), 0.0);
  // Beyond the largest event the integrand is truncated.
  EXPECT_DOUBLE_EQ(integrate_hazard_ratio(G, 7.0), 1.0);
}

TEST(HazardRatio, ClampGuardRaisesOnDivergentPiece) {
  // Improper tail with no truncation point beyond the last censoring.
  const StepDistribution G({0.0, 1.0}, {0.5, 1.0});
  EXPECT_NO_THROW(integrate_hazard_ratio(G, 1.0));
  EXPECT_THROW(integrate_hazard_ratio(G, 2.0), NumericalError);
}

class KmRandomized : public ::testing::TestWithParam<int> {};

TEST_P(KmRandomized, MatchesBruteForceProductLimit) {
  std::mt19937_64 gen(static_cast<std::uint64_t>(GetParam()));
  std::uniform_int_distribution<int> size(1, 25);
  std::uniform_int_distribution<int> grid(0, 9);  // coarse grid forces ties
  std::bernoulli_distribution censored(0.4);
  const int n = size(gen);
  std::vector<double> t(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> e(static_cast<std::size_t>(n));
  std::vector<int> ei(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    t[static_cast<std::size_t>(i)] = 0.5 * grid(gen);
    ei[static_cast<std::size_t>(i)] = censored(gen) ? 0 : 1;
    e[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(ei[static_cast<std::size_t>(i)]);
  }
  const auto G = censoring(t, e);
  const auto ref = oracle::censoring_km(t, ei);
  for (double u = -1.0; u <= 6.0; u += 0.25) {
    EXPECT_NEAR(G(u), ref.cdf(u), 1e-14) << "u=" << u;
    EXPECT_NEAR(G.left_limit(u), ref.left_limit(u), 1e-14) << "u=" << u;
  }
  if (std::find(ei.begin(), ei.end(), 1) != ei.end()) {
    const auto F = km_event(t, e);
    const auto fref = oracle::event_km(t, ei);
    for (double u = -1.0; u <= 6.0; u += 0.25) EXPECT_NEAR(F(u), fref.cdf(u), 1e-14);

    const double cap = oracle::largest_event(t, ei);
    bool guarded = false;
    for (double u = -1.0; u <= 6.0; u += 0.125) {
      try {
        const double got = integrate_hazard_ratio(G, u);
        EXPECT_NEAR(got, oracle::hazard_ratio_integral(ref, u, cap), 1e-10 * (1.0 + got)) << "u=" << u;
      } catch (const NumericalError&) {
        guarded = true;
      }
    }
    (void)guarded;
  }
}

TEST_P(KmRandomized, ExtraCensoringNeverRaisesGBeforeIt) {
  std::mt19937_64 gen(1000 + static_cast<std::uint64_t>(GetParam()));
  std::uniform_int_distribution<int> size(2, 20);
  std::uniform_int_distribution<int> grid(0, 9);
  std::bernoulli_distribution censored(0.3);
  const int n = size(gen);
  std::vector<double> t;
  std::vector<std::uint8_t> e;
  for (int i = 0; i < n; ++i) {
    t.push_back(grid(gen));
    e.push_back(censored(gen) ? 0 : 1);
  }
  const double added = grid(gen);
  auto t2 = t;
  auto e2 = e;
  t2.push_back(added);
  e2.push_back(0);
  const auto before = censoring(t, e);
  const auto after = censoring(t2, e2);
  for (double u = -1.0; u < added; u += 0.5) EXPECT_LE(after(u), before(u) + 1e-15) << "u=" << u;
}

INSTANTIATE_TEST_SUITE_P(Seeds, KmRandomized, ::testing::Range(0, 40));

TEST(HazardRatio, AdditiveMonotoneContinuous) {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> norm;
  std::vector<double> t(200);
  std::vector<std::uint8_t> e(200);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double y = norm(gen), c = 0.5 + norm(gen);
    t[i] = std::min(y, c);
    e[i] = y <= c;
  }
  const auto G = censoring(t, e);
  const HazardRatioIntegral table(G);
  const double limit = G.integration_limit();
  double prev = 0.0;
  for (double u = -4.0; u <= limit; u += 0.01) {
    const double k = integrate_hazard_ratio(G, u);
    EXPECT_GE(k, prev);
    EXPECT_NEAR(table(u), k, 1e-10 * (1.0 + k));
    // Additivity: I(a) + integral over [a, b) = I(b).
    const double b = std::min(u + 0.3, limit);
    const auto ref = oracle::censoring_km(std::vector<double>(t.begin(), t.end()),
                                          std::vector<int>(e.begin(), e.end()));
    if (static_cast<int>(u * 100) % 50 == 0) {
      const double piece = oracle::step_integral(ref, u, b, [](double g) { return g / (1.0 - g); });
      EXPECT_NEAR(k + piece, integrate_hazard_ratio(G, b), 1e-9 * (1.0 + k));
    }
    // Continuity: tiny steps produce tiny changes.
    EXPECT_NEAR(integrate_hazard_ratio(G, u + 1e-9), k, 1e-6);
    prev = k;
  }
}

TEST(HazardRatio, DoubleIntegralMatchesQuadrature) {
  const std::vector<double> t{0.0, 0.3, 0.8, 1.1, 1.7, 2.0, 2.6};
  const auto G = censoring(t, flags({1, 0, 1, 0, 0, 1, 1}));
  const HazardRatioIntegral table(G);
  HazardRatioCursor cursor(table);
  for (double u = -1.0; u <= 4.0; u += 0.37) {
    // Midpoint rule on K, exact enough for a piecewise-linear integrand with fine steps.
    double l = 0.0;
    const double h = 1e-4;
    for (double s = -1.0; s < u; s += h) l += h * table(std::min(s + 0.5 * h, u));
    EXPECT_NEAR(table.double_integral(u), l, 1e-3) << "u=" << u;
    EXPECT_NEAR(cursor.double_integral(u), table.double_integral(u), 1e-12);
  }
}

TEST(InverseSurvival, BetweenMatchesPiecewiseSum) {
  const std::vector<double> t{0.0, 0.3, 0.8, 1.1, 1.7, 2.0, 2.6};
  const std::vector<int> ei{1, 0, 1, 0, 0, 1, 1};
  const auto G = censoring(t, flags({1, 0, 1, 0, 0, 1, 1}));
  const InverseSurvivalIntegral inv(G);
  const auto ref = oracle::censoring_km(t, ei);
  for (double a = -0.5; a < 3.0; a += 0.29)
    for (double b = a; b < 3.5; b += 0.41) {
      const double cb = std::min(b, 2.6), ca = std::min(a, 2.6);
      const double expect = oracle::step_integral(ref, ca, cb, [](double g) { return 1.0 / (1.0 - g); });
      EXPECT_NEAR(inv.between(a, b), expect, 1e-12) << a << " " << b;
      if (b > a) EXPECT_NEAR(inv.clipped(b) - inv.clipped(a), expect, 1e-12);
    }
}

TEST(StepDistribution, InvariantsEnforced) {
  EXPECT_THROW(StepDistribution({1.0, 0.5}, {0.2, 0.4}), Error);
  EXPECT_THROW(StepDistribution({1.0, 2.0}, {0.4, 0.2}), Error);
  EXPECT_THROW(StepDistribution({1.0}, {1.5}), Error);
  const StepDistribution F({1.0, 2.0}, {0.25, 0.5});
  EXPECT_EQ(F.left_limit(1.0), 0.0);
  EXPECT_EQ(F.left_limit(2.0), 0.25);
  const auto c = F.completed();
  EXPECT_EQ(c.cdf_values().back(), 1.0);
  // Completed masses: 0.25 at 1, 0.75 at 2.
  EXPECT_DOUBLE_EQ(F.mean(), 0.25 * 1.0 + 0.75 * 2.0);
  EXPECT_DOUBLE_EQ(F.variance(), 0.25 * 0.75);
}
