#include "ctsls/estimator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ctsls/design.hpp"
#include "ctsls/error.hpp"
#include "ctsls/km.hpp"
#include "ctsls/variance.hpp"

namespace ctsls {

namespace {

void attach_inference(FitResult& fit, const Eigen::MatrixXd& covariance, double level) {
  fit.covariance = covariance;
  auto wald = wald_inference(fit.estimate, covariance, level);
  fit.std_errors = std::move(wald.std_errors);
  fit.conf_intervals = std::move(wald.conf_intervals);
  fit.p_values = std::move(wald.p_values);
}

FitDiagnostics base_diagnostics(const CensoredSample& sample, const Stage1Fit* stage1) {
  FitDiagnostics d;
  d.censored_fraction = sample.censored_fraction();
  if (stage1) d.first_stage_r2 = stage1->r_squared;
  return d;
}

}  // namespace

Stage1Fit stage1_fit(const CensoredSample& sample) {
  const auto design = stage1_design(sample);
  const auto& x = sample.exposure();
  Stage1Fit out;
  out.alpha = solve_weighted_ls(design, x, Eigen::VectorXd::Ones(x.size()));
  out.fitted = design * out.alpha;
  const double sst = (x.array() - x.mean()).square().sum();
  const double ssr = (x - out.fitted).squaredNorm();
  out.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
  return out;
}

Eigen::VectorXd stage2_fit(const Eigen::VectorXd& synthetic, const Eigen::VectorXd& fitted_x,
                           const Eigen::MatrixXd& confounders, const WeightVector& weights) {
  if (confounders.rows() != fitted_x.size())
    throw NumericalError("stage 2: confounder rows do not match fitted exposure length");
  return solve_weighted_ls(stage2_design(fitted_x, confounders), synthetic, weights.values);
}

double residual_variance(const StepDistribution& F_residual) { return F_residual.variance(); }

FitResult fit_ctsls(const CensoredSample& sample, const FitOptions& options) {
  if (options.kmax < 1) throw InputError("kmax must be at least 1");
  if (!(options.tol > 0.0)) throw InputError("tol must be positive");

  const auto q = sample.q();
  const auto p = sample.p();
  const auto& events = sample.event();

  const auto G = km_censoring(sample);
  const auto synthetic = leurgans_transform(sample, G);
  const auto stage1 = stage1_fit(sample);
  const auto& confounders = sample.confounders();
  const Eigen::MatrixXd v = stage2_design(stage1.fitted, confounders);

  auto weights = WeightVector::constant(sample.n());
  Eigen::VectorXd beta = stage2_fit(synthetic.values, stage1.fitted, confounders, weights);

  FitResult fit;
  fit.estimator = options.weighted ? "ctsls_weighted" : "ctsls_unweighted";
  fit.names = ParameterVector::names(q, p);
  fit.beta1_index = ParameterVector::beta1_index(q, p);
  fit.trace.push_back(ParameterVector::from_blocks(stage1.alpha, beta, q, p).stacked());

  if (options.weighted) {
    fit.converged = false;
    for (int k = 1; k <= options.kmax; ++k) {
      const Eigen::VectorXd mu_y = v * beta;
      const Eigen::VectorXd residuals = synthetic.values - mu_y;
      const auto F = km_event({residuals.data(), static_cast<std::size_t>(residuals.size())}, events);
      const double var_y = residual_variance(F);
      if (G.is_zero() && !(var_y > 0.0))
        weights = WeightVector::constant(sample.n());
      else
        weights = compute_weights(G, F, {mu_y.data(), static_cast<std::size_t>(mu_y.size())}, var_y);
      weights.values /= weights.values.mean();  // scale-free; keeps A-hat well conditioned
      beta = stage2_fit(synthetic.values, stage1.fitted, confounders, weights);

      auto theta = ParameterVector::from_blocks(stage1.alpha, beta, q, p).stacked();
      const double change = (theta - fit.trace.back()).cwiseAbs().maxCoeff();
      fit.trace.push_back(std::move(theta));
      fit.iterations = k;
      if (change < options.tol) {
        fit.converged = true;
        break;
      }
    }
  }

  const auto theta = ParameterVector::from_blocks(stage1.alpha, beta, q, p);
  fit.estimate = theta.stacked();
  fit.weights_final = weights;

  const auto contribs = score_contributions(sample, theta, G, synthetic, weights);
  const auto parts = sandwich(assemble_a_hat(sample, theta, synthetic, weights),
                              assemble_b_hat(contribs), sample.n());
  attach_inference(fit, parts.covariance, options.level);

  fit.diagnostics = base_diagnostics(sample, &stage1);
  fit.diagnostics.a_condition = parts.a_condition;
  fit.diagnostics.clamp_activations = synthetic.truncated;
  fit.diagnostics.tail_truncated =
      std::isfinite(G.integration_limit()) && sample.log_time().maxCoeff() > G.integration_limit();
  return fit;
}

FitResult fit_cols(const CensoredSample& sample, double level) {
  const auto G = km_censoring(sample);
  const auto synthetic = leurgans_transform(sample, G);
  const auto design = stage2_design(sample.exposure(), sample.confounders());
  const auto n = design.rows();

  FitResult fit;
  fit.estimator = "cols";
  fit.names = {"beta0", "beta1"};
  for (std::size_t k = 1; k <= sample.p(); ++k) fit.names.push_back(fmt::format("beta2_{}", k));
  fit.beta1_index = 1;
  fit.estimate = solve_weighted_ls(design, synthetic.values, Eigen::VectorXd::Ones(n));
  fit.trace.push_back(fit.estimate);
  fit.weights_final = WeightVector::constant(sample.n());

  // HC0: (X'X)^-1 X' diag(e^2) X (X'X)^-1
  const Eigen::VectorXd resid = synthetic.values - design * fit.estimate;
  const Eigen::MatrixXd bread = (design.transpose() * design).inverse();
  const Eigen::MatrixXd meat = design.transpose() * resid.array().square().matrix().asDiagonal() * design;
  Eigen::MatrixXd cov = bread * meat * bread;
  attach_inference(fit, 0.5 * (cov + cov.transpose()), level);

  fit.diagnostics = base_diagnostics(sample, nullptr);
  fit.diagnostics.a_condition = condition_number(design.transpose() * design / static_cast<double>(n));
  fit.diagnostics.clamp_activations = synthetic.truncated;
  return fit;
}

FitResult fit_tsls_uncensored(const CensoredSample& sample, double level) {
  if (sample.event_count() != sample.n())
    throw InputError("fit_tsls_uncensored: sample contains censored subjects");
  const auto q = sample.q();
  const auto p = sample.p();
  const auto n = static_cast<double>(sample.n());
  const auto& y = sample.log_time();

  const auto stage1 = stage1_fit(sample);
  const auto w1 = stage1_design(sample);
  const auto v = stage2_design(stage1.fitted, sample.confounders());
  const Eigen::VectorXd beta = solve_weighted_ls(v, y, Eigen::VectorXd::Ones(y.size()));

  FitResult fit;
  fit.estimator = "tsls_uncensored";
  fit.names = ParameterVector::names(q, p);
  fit.beta1_index = ParameterVector::beta1_index(q, p);
  fit.estimate = ParameterVector::from_blocks(stage1.alpha, beta, q, p).stacked();
  fit.trace.push_back(fit.estimate);
  fit.weights_final = WeightVector::constant(sample.n());

  // Influence functions IF_i = A^-1 phi_i with the block-triangular inverse
  //   A^-1 = [A11^-1, 0; -A22^-1 A21 A11^-1, A22^-1].
  const Eigen::VectorXd mu_y = v * beta;
  const Eigen::VectorXd e1 = sample.exposure() - stage1.fitted;
  const Eigen::VectorXd e2 = y - mu_y;
  const auto s1 = w1.cols();
  const auto s2 = v.cols();

  const Eigen::MatrixXd a11_inv = (w1.transpose() * w1 / n).inverse();
  const Eigen::MatrixXd a22_inv = (v.transpose() * v / n).inverse();
  Eigen::MatrixXd a21 = Eigen::MatrixXd::Zero(s2, s1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::VectorXd left(s2);
    left << beta[1], beta[1] * stage1.fitted[i] - e2[i], beta[1] * sample.confounders().row(i).transpose();
    a21.noalias() += left * w1.row(i);
  }
  a21 /= n;

  const Eigen::MatrixXd phi1 = e1.asDiagonal() * w1;  // n x s1
  const Eigen::MatrixXd phi2 = e2.asDiagonal() * v;   // n x s2
  const Eigen::MatrixXd if1 = phi1 * a11_inv.transpose();
  const Eigen::MatrixXd if2 = (phi2 - if1 * a21.transpose()) * a22_inv.transpose();
  Eigen::MatrixXd influence(v.rows(), s1 + s2);
  influence << if1, if2;
  Eigen::MatrixXd cov = influence.transpose() * influence / (n * n);
  attach_inference(fit, 0.5 * (cov + cov.transpose()), level);

  fit.diagnostics = base_diagnostics(sample, &stage1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(s1 + s2, s1 + s2);
  a.topLeftCorner(s1, s1) = w1.transpose() * w1 / n;
  a.bottomLeftCorner(s2, s1) = a21;
  a.bottomRightCorner(s2, s2) = v.transpose() * v / n;
  fit.diagnostics.a_condition = condition_number(a);
  return fit;
}

}  // namespace ctsls
