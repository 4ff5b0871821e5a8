#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ctsls/dataset.hpp"
#include "ctsls/linalg.hpp"
#include "ctsls/parameters.hpp"
#include "ctsls/synthetic.hpp"

namespace ctsls {

struct FitOptions {
  double tol = 1e-3;     // max-norm stopping tolerance on theta
  int kmax = 10;         // maximum number of reweighting iterations
  bool weighted = true;  // false: unit weights, no iteration
  double level = 0.95;   // Wald interval level
};

struct FitDiagnostics {
  double a_condition = 0.0;          // condition number of the bread matrix
  std::size_t clamp_activations = 0; // synthetic integrals cut at the tail limit
  bool tail_truncated = false;       // largest observation censored
  double first_stage_r2 = 0.0;
  double censored_fraction = 0.0;
};

/// Outcome of one estimator run. `estimate` is stacked in `names` order; for
/// the IV estimators that order is ParameterVector::stacked().
struct FitResult {
  std::string estimator;
  std::vector<std::string> names;
  Eigen::VectorXd estimate;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd std_errors;
  std::vector<std::pair<double, double>> conf_intervals;
  Eigen::VectorXd p_values;
  std::size_t beta1_index = 0;
  int iterations = 0;
  bool converged = true;
  std::vector<Eigen::VectorXd> trace;  // theta^(0), theta^(1), ...
  WeightVector weights_final;
  FitDiagnostics diagnostics;

  double beta1() const { return estimate[static_cast<Eigen::Index>(beta1_index)]; }
  double beta1_variance() const {
    const auto i = static_cast<Eigen::Index>(beta1_index);
    return covariance(i, i);
  }
  std::pair<double, double> beta1_interval() const { return conf_intervals[beta1_index]; }
};

struct Stage1Fit {
  Eigen::VectorXd alpha;   // (alpha0, alpha1, alpha2)
  Eigen::VectorXd fitted;  // mu_X
  double r_squared = 0.0;
};

/// Unweighted least squares of X on [1, Z, D].
Stage1Fit stage1_fit(const CensoredSample& sample);

/// Weighted least squares of Y* on [1, fitted_x, D]; returns (beta0, beta1, beta2).
Eigen::VectorXd stage2_fit(const Eigen::VectorXd& synthetic, const Eigen::VectorXd& fitted_x,
                           const Eigen::MatrixXd& confounders, const WeightVector& weights);

/// Censored two-stage least squares with iterative reweighting.
///
/// G-hat and Y* are computed once. Stage 1 is fitted once (its estimating
/// equation carries no weights). Starting from unit weights, each iteration
/// takes stage-2 residuals r = Y* - mu_Y, fits the product-limit F-hat to
/// (r, event), recomputes omega_i = 1 / Var(Y*_i) and refits stage 2, until the
/// max-norm change in theta drops below `tol` or `kmax` iterations ran.
/// Non-convergence is reported through `converged`, not thrown.
FitResult fit_ctsls(const CensoredSample& sample, const FitOptions& options = {});

/// Naive one-stage comparator: Y* on [1, X, D] with an HC0 sandwich that
/// treats Y* as data.
FitResult fit_cols(const CensoredSample& sample, double level = 0.95);

/// Classical TSLS with the stacked estimating-equation sandwich. Requires an
/// uncensored sample.
FitResult fit_tsls_uncensored(const CensoredSample& sample, double level = 0.95);

/// Restricted variance of the residual distribution used as Var(Y_i).
double residual_variance(const StepDistribution& F_residual);

}  // namespace ctsls
