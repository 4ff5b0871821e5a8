#include <gtest/gtest.h>

#include <random>

#include "ctsls/design.hpp"
#include "ctsls/error.hpp"
#include "ctsls/estimator.hpp"
#include "ctsls/km.hpp"
#include "ctsls/rng.hpp"
#include "ctsls/simgen.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ctsls;

namespace {

CensoredSample identity_fixture() {
  // n=4, no censoring, Z=(0,1,2,3), X=Z, Y=2X+1, p=0.
  Eigen::VectorXd z(4), y(4);
  z << 0, 1, 2, 3;
  y = 2.0 * z.array() + 1.0;
  return {y, std::vector<std::uint8_t>(4, 1), z, Eigen::MatrixXd(4, 0), z};
}

}  // namespace

TEST(WeightedLs, ExactInterpolation) {
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, 1, 1;
  const Eigen::Vector2d y(1, 3);
  const auto b = solve_weighted_ls(x, y, Eigen::Vector2d::Ones());
  EXPECT_NEAR(b[0], 1.0, 1e-14);
  EXPECT_NEAR(b[1], 2.0, 1e-14);
}

TEST(WeightedLs, MatchesNormalEquationsAndScaleInvariant) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> norm;
  std::uniform_real_distribution<double> unif(0.2, 3.0);
  Eigen::MatrixXd x(50, 3);
  Eigen::VectorXd y(50), w(50);
  for (int i = 0; i < 50; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = norm(gen);
    x(i, 2) = norm(gen);
    y[i] = norm(gen);
    w[i] = unif(gen);
  }
  const auto b = solve_weighted_ls(x, y, w);
  EXPECT_LT((b - oracle::normal_equations(x, y, w)).cwiseAbs().maxCoeff(), 1e-8);
  const auto b7 = solve_weighted_ls(x, y, 7.0 * w);
  EXPECT_LT((b - b7).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WeightedLs, RankDeficiencyReportsColumns) {
  Eigen::MatrixXd x(5, 3);
  x << 1, 2, 4, 1, 3, 6, 1, 5, 10, 1, 7, 14, 1, 1, 2;
  try {
    solve_weighted_ls(x, Eigen::VectorXd::Ones(5), Eigen::VectorXd::Ones(5));
    FAIL() << "expected RankDeficientError";
  } catch (const RankDeficientError& e) {
    ASSERT_EQ(e.columns().size(), 1u);
    EXPECT_TRUE(e.columns()[0] == 1 || e.columns()[0] == 2);
  }
}

TEST(WeightedLs, RejectsBadWeights) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
  EXPECT_THROW(solve_weighted_ls(x, Eigen::VectorXd::Ones(3), Eigen::Vector3d(1, 0, 1)), Error);
}

TEST(Stage1, ExactInstrument) {
  const auto fit = stage1_fit(identity_fixture());
  EXPECT_NEAR(fit.alpha[0], 0.0, 1e-12);
  EXPECT_NEAR(fit.alpha[1], 1.0, 1e-12);
  EXPECT_NEAR((fit.fitted - identity_fixture().instruments().col(0)).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(Stage1, NullInstrumentWithinThreeSe) {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> norm;
  const int n = 20000;
  Eigen::VectorXd x(n), y(n), z(n);
  for (int i = 0; i < n; ++i) {
    x[i] = norm(gen);
    z[i] = norm(gen);
    y[i] = norm(gen);
  }
  const CensoredSample sample(y, std::vector<std::uint8_t>(n, 1), x, Eigen::MatrixXd(n, 0), z);
  const auto fit = stage1_fit(sample);
  // SE of a slope with unit-variance regressor and error: 1/sqrt(n).
  EXPECT_LT(std::abs(fit.alpha[1]), 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Stage1, SimulationDesignRecoversAlpha) {
  SimConfig cfg;
  cfg.n = 100000;
  cfg.censor_rate = 0.0;
  Rng rng(77);
  const auto data = generate_dataset(cfg, rng);
  const auto fit = stage1_fit(data.sample);
  const Eigen::VectorXd truth = (Eigen::VectorXd(5) << 0.0, 0.5, 0.5, 0.3, 0.3).finished();
  EXPECT_LT((fit.alpha - truth).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Stage2, ExactFitAnyWeights) {
  Eigen::VectorXd fx(5);
  fx << -1, 0.5, 2, 3, 4.5;
  const Eigen::VectorXd ys = (2.0 * fx.array() + 1.0).matrix();
  Eigen::VectorXd w(5);
  w << 0.3, 2, 1, 5, 0.7;
  const auto b = stage2_fit(ys, fx, Eigen::MatrixXd(5, 0), {w});
  EXPECT_NEAR(b[0], 1.0, 1e-12);
  EXPECT_NEAR(b[1], 2.0, 1e-12);
}

TEST(Stage2, ConstantFittedExposureIsRankDeficient) {
  const Eigen::VectorXd fx = Eigen::VectorXd::Constant(6, 1.5);
  EXPECT_THROW(stage2_fit(Eigen::VectorXd::LinSpaced(6, 0, 1), fx, Eigen::MatrixXd(6, 0), WeightVector::constant(6)),
               RankDeficientError);
}

TEST(Stage2, UnitWeightsEqualOls) {
  const auto sample = fixtures::random_sample(5, 80, 2, 2, 1e300);
  const auto s1 = stage1_fit(sample);
  const auto b = stage2_fit(sample.log_time(), s1.fitted, sample.confounders(), WeightVector::constant(80));
  const auto ref = oracle::normal_equations(stage2_design(s1.fitted, sample.confounders()), sample.log_time(),
                                            Eigen::VectorXd::Ones(80));
  EXPECT_LT((b - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Stage2, WeightScaleAndAffineEquivariance) {
  const auto sample = fixtures::random_sample(6, 150, 2, 1, 0.5);
  const auto G = km_censoring(sample);
  const auto ys = leurgans_transform(sample, G);
  const auto s1 = stage1_fit(sample);
  Eigen::VectorXd w(150);
  for (int i = 0; i < 150; ++i) w[i] = 0.5 + 0.01 * i;
  const auto b = stage2_fit(ys.values, s1.fitted, sample.confounders(), {w});
  for (double c : {1e-3, 0.37, 11.0, 4e4}) {
    const auto bc = stage2_fit(ys.values, s1.fitted, sample.confounders(), {c * w});
    EXPECT_LT((b - bc).cwiseAbs().maxCoeff(), 1e-12) << "c=" << c;
  }
  const Eigen::VectorXd shifted = ys.values.array() + 2.5;
  const auto bs = stage2_fit(shifted, s1.fitted, sample.confounders(), {w});
  EXPECT_NEAR(bs[0] - b[0], 2.5, 1e-10);
  EXPECT_LT((bs.tail(bs.size() - 1) - b.tail(b.size() - 1)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitCtsls, IdentityFixture) {
  const auto fit = fit_ctsls(identity_fixture());
  EXPECT_NEAR(fit.beta1(), 2.0, 1e-12);
  EXPECT_NEAR(fit.estimate[static_cast<Eigen::Index>(fit.beta1_index - 1)], 1.0, 1e-12);
  EXPECT_EQ(fit.iterations, 1);
  EXPECT_TRUE(fit.converged);
  const auto tsls = fit_tsls_uncensored(identity_fixture());
  EXPECT_NEAR(tsls.beta1(), 2.0, 1e-12);
}

TEST(FitCtsls, NoCensoringReducesToTsls) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sample = fixtures::random_sample(seed, 120, 2, 2, 1e300);
    const auto a = fit_ctsls(sample);
    const auto b = fit_tsls_uncensored(sample);
    EXPECT_LT((a.estimate - b.estimate).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(FitTsls, MatchesTwoPassOlsOracle) {
  const auto sample = fixtures::random_sample(31, 200, 2, 3, 1e300);
  const auto fit = fit_tsls_uncensored(sample);
  const auto ref = oracle::two_pass_ols(sample.log_time(), sample.exposure(), sample.confounders(),
                                        sample.instruments());
  Eigen::VectorXd stacked(ref.alpha.size() + ref.beta.size());
  stacked << ref.alpha, ref.beta;
  EXPECT_LT((fit.estimate - stacked).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FitTsls, RejectsCensoredSamples) {
  const auto sample = fixtures::random_sample(2, 60, 1, 1, 0.0);
  EXPECT_THROW(fit_tsls_uncensored(sample), InputError);
}

TEST(FitCtsls, UnweightedRunsNoIterations) {
  const auto sample = fixtures::random_sample(8, 300, 2, 2, 0.5);
  FitOptions opts;
  opts.weighted = false;
  const auto fit = fit_ctsls(sample, opts);
  EXPECT_EQ(fit.iterations, 0);
  EXPECT_TRUE(fit.converged);
  EXPECT_EQ(fit.trace.size(), 1u);
  for (auto w : fit.weights_final.values) EXPECT_EQ(w, 1.0);
}

TEST(FitCtsls, Stage1FixedAndStoppingRule) {
  for (std::uint64_t seed = 40; seed < 50; ++seed) {
    const auto sample = fixtures::random_sample(seed, 250, 2, 2, 0.3);
    FitOptions opts;
    opts.tol = 1e-6;
    opts.kmax = 4;
    const auto fit = fit_ctsls(sample, opts);
    const auto k1 = static_cast<Eigen::Index>(ParameterVector::stage1_dim(2, 2));
    ASSERT_EQ(fit.trace.size(), static_cast<std::size_t>(fit.iterations) + 1);
    for (const auto& th : fit.trace) EXPECT_EQ(th.head(k1), fit.trace.front().head(k1));
    const double last = (fit.trace.back() - fit.trace[fit.trace.size() - 2]).cwiseAbs().maxCoeff();
    EXPECT_TRUE(last < opts.tol || fit.iterations == opts.kmax);
    EXPECT_EQ(fit.converged, last < opts.tol);
    for (std::size_t k = 1; k + 1 < fit.trace.size(); ++k)
      EXPECT_GE((fit.trace[k] - fit.trace[k - 1]).cwiseAbs().maxCoeff(), opts.tol);
  }
}

TEST(FitCtsls, NonConvergenceIsFlaggedNotThrown) {
  const auto sample = fixtures::random_sample(9, 200, 1, 1, 0.0);
  FitOptions opts;
  opts.tol = 1e-300;
  opts.kmax = 2;
  const auto fit = fit_ctsls(sample, opts);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.iterations, 2);
}

TEST(FitCtsls, CovarianceSymmetricPsdAndSeConsistent) {
  const auto sample = fixtures::random_sample(10, 400, 2, 2, 0.4);
  const auto fit = fit_ctsls(sample);
  EXPECT_LT((fit.covariance - fit.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.covariance);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12 * eig.eigenvalues().maxCoeff());
  for (Eigen::Index i = 0; i < fit.std_errors.size(); ++i)
    EXPECT_DOUBLE_EQ(fit.std_errors[i], std::sqrt(fit.covariance(i, i)));
  EXPECT_GT(fit.beta1_variance(), 0.0);
}

TEST(FitCols, ExogenousConsistent) {
  // Uncensored, X independent of the outcome error: OLS is consistent.
  std::mt19937_64 gen(55);
  std::normal_distribution<double> norm;
  const int n = 10000;
  Eigen::VectorXd x(n), y(n), z(n);
  Eigen::MatrixXd d(n, 1);
  for (int i = 0; i < n; ++i) {
    z[i] = norm(gen);
    d(i, 0) = norm(gen);
    x[i] = 0.5 * z[i] + 0.3 * d(i, 0) + norm(gen);
    y[i] = 1.0 * x[i] + 0.5 * d(i, 0) + norm(gen);
  }
  const CensoredSample sample(y, std::vector<std::uint8_t>(n, 1), x, d, z);
  const auto fit = fit_cols(sample);
  EXPECT_LT(std::abs(fit.beta1() - 1.0), 3.0 * fit.std_errors[1]);
}

TEST(FitCols, EndogenousScenarioIsBiased) {
  SimConfig cfg;
  cfg.n = 1000;
  cfg.censor_rate = 0.25;
  Rng rng(5);
  const auto data = generate_dataset(cfg, rng);
  const auto fit = fit_cols(data.sample);
  EXPECT_GT(std::abs(fit.beta1() - 1.0), 0.05);
}

TEST(FitCols, ConstantExposureIsRankError) {
  const auto base = fixtures::random_sample(1, 30, 1, 1, 1e300);
  const CensoredSample sample(base.log_time(), base.event(), Eigen::VectorXd::Constant(30, 2.0),
                              base.confounders(), base.instruments());
  EXPECT_THROW(fit_cols(sample), RankDeficientError);
}
