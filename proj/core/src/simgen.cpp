#include "ctsls/simgen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>

#include <fmt/format.h>

#include "ctsls/error.hpp"

namespace ctsls {

namespace {

struct Hasher {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(std::uint64_t v) {
    std::uint64_t state = h ^ v;
    h = splitmix64(state);
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  void add(const Eigen::VectorXd& v) {
    add(static_cast<std::uint64_t>(v.size()));
    for (auto x : v) add(x);
  }
};

struct SubjectDraw {
  double y = 0.0;
  double x = 0.0;
};

// Draws Z, D and the errors for one subject, in that order.
SubjectDraw draw_subject(const SimConfig& config, Rng& rng, double* z, double* d) {
  const auto& prm = config.params;
  double x = 0.0;
  double y_confounding = 0.0;
  for (std::size_t k = 0; k < prm.q(); ++k) {
    z[k] = config.instrument_sd * rng.normal();
    x += prm.alpha1[static_cast<Eigen::Index>(k)] * z[k];
  }
  for (std::size_t k = 0; k < prm.p(); ++k) {
    d[k] = config.confounder_sd * rng.normal();
    x += prm.alpha2[static_cast<Eigen::Index>(k)] * d[k];
    y_confounding += prm.beta2[static_cast<Eigen::Index>(k)] * d[k];
  }
  const auto [xi1, xi2] = draw_errors(config.scenario, rng);
  x += xi1;
  return {prm.beta1 * x + y_confounding + xi2, x};
}

}  // namespace

void ErrorScenario::validate() const {
  if (components.empty()) throw InputError("error scenario has no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.proportion > 0.0)) throw InputError("mixture proportions must be positive");
    if (!(c.var1 > 0.0) || !(c.var2 > 0.0)) throw InputError("mixture variances must be positive");
    if (!(std::abs(c.rho) < 1.0)) throw InputError("mixture correlation must satisfy |rho| < 1");
    if (!std::isfinite(c.mean1) || !std::isfinite(c.mean2)) throw InputError("mixture means must be finite");
    total += c.proportion;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InputError(fmt::format("mixture proportions sum to {:.17g}, not 1", total));
}

ErrorScenario ErrorScenario::single_gaussian() {
  return {"single_gaussian", {{0.00, 0.00, 0.50, 1.00, -0.42, 1.00}}};
}

ErrorScenario ErrorScenario::gaussian_mixture() {
  return {"gaussian_mixture",
          {{5.00, 4.00, 0.20, 1.00, 0.70, 0.50},
           {5.00, 1.00, 0.40, 0.50, 0.50, 0.30},
           {5.00, 5.00, 0.30, 2.00, -0.90, 0.20}}};
}

ErrorScenario ErrorScenario::by_id(int id) {
  switch (id) {
    case 1: return single_gaussian();
    case 2: return gaussian_mixture();
    default: throw InputError(fmt::format("unknown scenario id {} (expected 1 or 2)", id));
  }
}

TrueParams TrueParams::defaults() {
  TrueParams t;
  t.alpha1 = Eigen::Vector2d(0.5, 0.5);
  t.alpha2 = Eigen::Vector2d(0.3, 0.3);
  t.beta1 = 1.0;
  t.beta2 = Eigen::Vector2d(0.5, 0.5);
  return t;
}

void SimConfig::validate() const {
  scenario.validate();
  if (n < 20) throw InputError(fmt::format("n={} is below the minimum of 20", n));
  if (!(censor_rate >= 0.0 && censor_rate < 1.0))
    throw InputError(fmt::format("censor_rate {} not in [0, 1)", censor_rate));
  if (params.q() < 1) throw InputError("at least one instrument coefficient is required");
  if (params.beta2.size() != params.alpha2.size())
    throw InputError("alpha2 and beta2 must have the same length");
  if (calibration_pop < 2) throw InputError("calibration_pop must be at least 2");
  if (!(instrument_sd > 0.0) || !(confounder_sd > 0.0)) throw InputError("covariate sds must be positive");
}

std::uint64_t SimConfig::calibration_key() const {
  Hasher h;
  h.add(censor_rate);
  for (const auto& c : scenario.components) {
    h.add(c.mean1);
    h.add(c.mean2);
    h.add(c.var1);
    h.add(c.var2);
    h.add(c.rho);
    h.add(c.proportion);
  }
  h.add(params.alpha1);
  h.add(params.alpha2);
  h.add(params.beta1);
  h.add(params.beta2);
  h.add(seed);
  h.add(static_cast<std::uint64_t>(calibration_pop));
  h.add(instrument_sd);
  h.add(confounder_sd);
  return h.h;
}

std::pair<double, double> draw_errors(const ErrorScenario& scenario, Rng& rng) {
  const double u = rng.uniform();
  const MixtureComponent* chosen = &scenario.components.back();
  double cumulative = 0.0;
  for (const auto& c : scenario.components) {
    cumulative += c.proportion;
    if (u < cumulative) {
      chosen = &c;
      break;
    }
  }
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  const double xi1 = chosen->mean1 + std::sqrt(chosen->var1) * z1;
  const double xi2 =
      chosen->mean2 + std::sqrt(chosen->var2) * (chosen->rho * z1 + std::sqrt(1.0 - chosen->rho * chosen->rho) * z2);
  return {xi1, xi2};
}

Calibration calibrate_censoring(const SimConfig& config, Rng& rng) {
  config.validate();
  const auto N = config.calibration_pop;
  std::vector<double> y(N);
  std::vector<double> z(config.params.q()), d(config.params.p());
  for (auto& yi : y) yi = draw_subject(config, rng, z.data(), d.data()).y;

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(N);
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);

  Calibration cal;
  cal.sigma_c = std::sqrt(ss / static_cast<double>(N - 1));
  if (config.censor_rate == 0.0) return cal;

  // Censored when Y_i > mu + sigma_c r_i, i.e. when W_i = Y_i - sigma_c r_i > mu.
  std::vector<double> w(N);
  for (std::size_t i = 0; i < N; ++i) w[i] = y[i] - cal.sigma_c * rng.normal();
  std::sort(w.begin(), w.end());
  auto fraction = [&](double mu) {
    const auto above = w.end() - std::upper_bound(w.begin(), w.end(), mu);
    return static_cast<double>(above) / static_cast<double>(N);
  };

  double lo = w.front() - 1.0;  // fraction(lo) = 1
  double hi = w.back() + 1.0;   // fraction(hi) = 0
  const double target = config.censor_rate;
  if (!(fraction(lo) >= target && fraction(hi) <= target))
    throw NumericalError("censoring calibration: bisection bracket does not contain the target");
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double f = fraction(mid);
    if (std::abs(f - target) <= kCalibrationTolerance) {
      cal.mu = mid;
      cal.achieved_fraction = f;
      return cal;
    }
    if (f > target) lo = mid;
    else hi = mid;
  }
  throw NumericalError(fmt::format(
      "censoring calibration: bisection failed to reach tolerance {:g} for target {}",
      kCalibrationTolerance, target));
}

Calibration cached_calibration(const SimConfig& config) {
  static std::mutex mutex;
  static std::map<std::uint64_t, Calibration> cache;
  const auto key = config.calibration_key();
  {
    std::lock_guard lock(mutex);
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
  }
  Rng rng(derive_seed(config.seed, kCalibrationStream));
  const auto cal = calibrate_censoring(config, rng);
  std::lock_guard lock(mutex);
  cache.emplace(key, cal);
  return cal;
}

GeneratedData generate_dataset(const SimConfig& config, const Calibration& calibration, Rng& rng) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(config.n);
  const auto q = static_cast<Eigen::Index>(config.params.q());
  const auto p = static_cast<Eigen::Index>(config.params.p());

  Eigen::VectorXd log_time(n), exposure(n), y_true(n), c_true(n);
  Eigen::MatrixXd instruments(n, q), confounders(n, p);
  std::vector<std::uint8_t> event(config.n);
  std::vector<double> z(static_cast<std::size_t>(q)), d(static_cast<std::size_t>(p));

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto draw = draw_subject(config, rng, z.data(), d.data());
    for (Eigen::Index k = 0; k < q; ++k) instruments(i, k) = z[static_cast<std::size_t>(k)];
    for (Eigen::Index k = 0; k < p; ++k) confounders(i, k) = d[static_cast<std::size_t>(k)];
    exposure[i] = draw.x;
    y_true[i] = draw.y;
    const double c = calibration.censoring_disabled()
                         ? std::numeric_limits<double>::infinity()
                         : calibration.mu + calibration.sigma_c * rng.normal();
    c_true[i] = c;
    const bool observed = draw.y <= c;
    event[static_cast<std::size_t>(i)] = observed ? 1 : 0;
    log_time[i] = observed ? draw.y : c;
  }
  return {CensoredSample(std::move(log_time), std::move(event), std::move(exposure),
                         std::move(confounders), std::move(instruments)),
          OracleTruth{std::move(y_true), std::move(c_true), config.params.beta1}, calibration};
}

GeneratedData generate_dataset(const SimConfig& config, Rng& rng) {
  return generate_dataset(config, cached_calibration(config), rng);
}

}  // namespace ctsls
