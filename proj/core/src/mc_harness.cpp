#include "ctsls/mc_harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "ctsls/error.hpp"

namespace ctsls {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Task {
  std::size_t cell = 0;
  std::size_t replicate = 0;
};

// Per-replicate outputs for one cell: records[estimator][replicate].
struct CellWork {
  SimConfig config;
  std::uint64_t seed = 0;
  std::vector<EstimatorKind> kinds;
  std::vector<std::vector<ReplicateRecord>> records;
  std::vector<double> censored_fraction;  // NaN when generation failed
};

ReplicateRecord run_estimator(EstimatorKind kind, const CensoredSample& sample, double beta1_true,
                              const FitOptions& fit_options) {
  ReplicateRecord rec;
  const auto start = std::chrono::steady_clock::now();
  try {
    FitResult fit;
    switch (kind) {
      case EstimatorKind::CtslsWeighted: {
        auto opts = fit_options;
        opts.weighted = true;
        fit = fit_ctsls(sample, opts);
        break;
      }
      case EstimatorKind::CtslsUnweighted: {
        auto opts = fit_options;
        opts.weighted = false;
        fit = fit_ctsls(sample, opts);
        break;
      }
      case EstimatorKind::Cols: fit = fit_cols(sample, fit_options.level); break;
      case EstimatorKind::TslsUncensored: fit = fit_tsls_uncensored(sample, fit_options.level); break;
    }
    rec.estimate = fit.beta1();
    rec.variance = fit.beta1_variance();
    const auto [lo, hi] = fit.beta1_interval();
    rec.covered = lo <= beta1_true && beta1_true <= hi;
    rec.converged = fit.converged;
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

void run_task(CellWork& work, std::size_t r, const HarnessOptions& options) {
  Rng rng(derive_seed(work.seed, r));
  const double beta1_true = work.config.params.beta1;
  try {
    const auto data = generate_dataset(work.config, rng);
    work.censored_fraction[r] = data.sample.censored_fraction();
    for (std::size_t e = 0; e < work.kinds.size(); ++e)
      work.records[e][r] = run_estimator(work.kinds[e], data.sample, beta1_true, options.fit);
  } catch (const std::exception& ex) {
    for (auto& per_kind : work.records) {
      per_kind[r].failed = true;
      per_kind[r].error = fmt::format("data generation: {}", ex.what());
    }
  }
}

std::size_t resolve_threads(std::size_t requested, std::size_t tasks) {
  std::size_t t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return std::max<std::size_t>(1, std::min(t, tasks));
}

std::string format_value(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : "nan"; }

std::vector<double> metric_values(const EstimatorSummary& s) {
  return {s.mean_bias, s.empirical_var, s.mean_sandwich_var, s.coverage_95, s.mean_estimate, s.rmse};
}

}  // namespace

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::CtslsWeighted: return "ctsls_weighted";
    case EstimatorKind::CtslsUnweighted: return "ctsls_unweighted";
    case EstimatorKind::Cols: return "cols";
    case EstimatorKind::TslsUncensored: return "tsls_uncensored";
  }
  return "unknown";
}

std::optional<EstimatorKind> parse_estimator(const std::string& name) {
  for (auto k : all_estimators())
    if (to_string(k) == name) return k;
  return std::nullopt;
}

const std::vector<EstimatorKind>& all_estimators() {
  static const std::vector<EstimatorKind> kinds{EstimatorKind::CtslsWeighted, EstimatorKind::CtslsUnweighted,
                                                EstimatorKind::Cols, EstimatorKind::TslsUncensored};
  return kinds;
}

const EstimatorSummary& McReport::summary(EstimatorKind kind) const {
  for (const auto& s : estimators)
    if (s.kind == kind) return s;
  throw InputError(fmt::format("report has no estimator '{}'", to_string(kind)));
}

std::uint64_t cell_seed(std::uint64_t master_seed, const SimConfig& config) {
  const auto s = derive_seed(master_seed, fnv1a(config.scenario.name), config.n);
  return derive_seed(s, std::bit_cast<std::uint64_t>(config.censor_rate));
}

void aggregate(EstimatorSummary& s, double beta1_true) {
  s.n_replicates = s.records.size();
  s.n_converged = 0;
  s.n_failed = 0;
  std::size_t ok = 0, covered = 0;
  double sum_est = 0.0, sum_var = 0.0, sum_sq_err = 0.0, sum_time = 0.0;
  for (const auto& r : s.records) {
    sum_time += r.runtime_s;
    if (r.failed) {
      ++s.n_failed;
      continue;
    }
    ++ok;
    sum_est += r.estimate;
    sum_var += r.variance;
    sum_sq_err += (r.estimate - beta1_true) * (r.estimate - beta1_true);
    if (r.converged) {
      ++s.n_converged;
      if (r.covered) ++covered;
    }
  }
  s.mean_runtime_s = s.n_replicates ? sum_time / static_cast<double>(s.n_replicates) : kNaN;
  if (ok == 0) {
    s.mean_estimate = s.mean_bias = s.mean_sandwich_var = s.empirical_var = s.rmse = kNaN;
  } else {
    const double k = static_cast<double>(ok);
    s.mean_estimate = sum_est / k;
    s.mean_bias = s.mean_estimate - beta1_true;
    s.mean_sandwich_var = sum_var / k;
    s.rmse = std::sqrt(sum_sq_err / k);
    if (ok < 2) {
      s.empirical_var = kNaN;
    } else {
      double ss = 0.0;
      for (const auto& r : s.records)
        if (!r.failed) ss += (r.estimate - s.mean_estimate) * (r.estimate - s.mean_estimate);
      s.empirical_var = ss / (k - 1.0);
    }
  }
  s.coverage_95 = s.n_converged ? static_cast<double>(covered) / static_cast<double>(s.n_converged) : kNaN;
}

std::vector<McReport> run_grid(const std::vector<SimConfig>& grid, const HarnessOptions& options) {
  if (options.replicates < 2) throw InputError("run_grid: replicates must be at least 2");
  if (grid.empty()) throw InputError("run_grid: empty grid");
  if (options.estimators.empty()) throw InputError("run_grid: no estimators requested");

  std::vector<CellWork> cells(grid.size());
  std::vector<Calibration> calibrations(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    auto& w = cells[c];
    w.config = grid[c];
    w.seed = cell_seed(options.master_seed, grid[c]);
    w.config.seed = w.seed;
    w.config.validate();
    for (auto k : options.estimators) {
      if (k == EstimatorKind::TslsUncensored && w.config.censor_rate != 0.0) continue;
      if (std::find(w.kinds.begin(), w.kinds.end(), k) == w.kinds.end()) w.kinds.push_back(k);
    }
    w.records.assign(w.kinds.size(), std::vector<ReplicateRecord>(options.replicates));
    w.censored_fraction.assign(options.replicates, kNaN);
    calibrations[c] = cached_calibration(w.config);
    if (options.progress)
      options.progress(fmt::format("cell {}/{}: scenario={} n={} censor_rate={} mu={:.6g} sigma_c={:.6g}", c + 1,
                                   grid.size(), w.config.scenario.name, w.config.n, w.config.censor_rate,
                                   calibrations[c].mu, calibrations[c].sigma_c));
  }

  std::vector<Task> tasks;
  tasks.reserve(grid.size() * options.replicates);
  for (std::size_t c = 0; c < grid.size(); ++c)
    for (std::size_t r = 0; r < options.replicates; ++r) tasks.push_back({c, r});

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;
  const std::size_t step = std::max<std::size_t>(1, tasks.size() / 20);
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      run_task(cells[tasks[i].cell], tasks[i].replicate, options);
      const auto finished = done.fetch_add(1) + 1;
      if (options.progress && (finished % step == 0 || finished == tasks.size())) {
        std::lock_guard lock(log_mutex);
        options.progress(fmt::format("{}/{} replicates done", finished, tasks.size()));
      }
    }
  };

  const auto n_threads = resolve_threads(options.threads, tasks.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  std::vector<McReport> reports;
  reports.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& w = cells[c];
    McReport rep;
    rep.cell = {w.config.scenario.name, w.config.n, w.config.censor_rate};
    rep.calibration = calibrations[c];
    rep.beta1_true = w.config.params.beta1;
    double sum = 0.0;
    std::size_t cnt = 0;
    for (double f : w.censored_fraction)
      if (!std::isnan(f)) {
        sum += f;
        ++cnt;
      }
    rep.realized_censoring = cnt ? sum / static_cast<double>(cnt) : kNaN;
    for (std::size_t e = 0; e < w.kinds.size(); ++e) {
      EstimatorSummary s;
      s.kind = w.kinds[e];
      s.records = std::move(w.records[e]);
      aggregate(s, rep.beta1_true);
      rep.estimators.push_back(std::move(s));
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

const std::vector<std::string>& report_metrics() {
  static const std::vector<std::string> names{"mean_bias",   "empirical_var", "mean_sandwich_var",
                                              "coverage_95", "mean_estimate", "rmse"};
  return names;
}

std::string report_csv(const std::vector<McReport>& reports) {
  if (reports.empty()) throw InputError("summarize: empty report list");
  std::string out = "scenario,n,censor_rate,estimator,metric,value,replicates,converged\n";
  const auto& names = report_metrics();
  for (const auto& rep : reports) {
    for (const auto& s : rep.estimators) {
      const auto values = metric_values(s);
      for (std::size_t m = 0; m < names.size(); ++m)
        out += fmt::format("{},{},{:.17g},{},{},{},{},{}\n", rep.cell.scenario, rep.cell.n, rep.cell.censor_rate,
                           to_string(s.kind), names[m], format_value(values[m]), s.n_replicates, s.n_converged);
    }
  }
  return out;
}

std::string report_json(const std::vector<McReport>& reports) {
  if (reports.empty()) throw InputError("summarize: empty report list");
  auto num = [](double v) -> nlohmann::json { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  nlohmann::json cells = nlohmann::json::array();
  const auto& names = report_metrics();
  for (const auto& rep : reports) {
    nlohmann::json est = nlohmann::json::object();
    for (const auto& s : rep.estimators) {
      nlohmann::json e;
      const auto values = metric_values(s);
      for (std::size_t m = 0; m < names.size(); ++m) e[names[m]] = num(values[m]);
      e["n_replicates"] = s.n_replicates;
      e["n_converged"] = s.n_converged;
      e["n_failed"] = s.n_failed;
      est[to_string(s.kind)] = std::move(e);
    }
    cells.push_back({{"scenario", rep.cell.scenario},
                     {"n", rep.cell.n},
                     {"censor_rate", rep.cell.censor_rate},
                     {"beta1_true", rep.beta1_true},
                     {"realized_censoring", num(rep.realized_censoring)},
                     {"calibration", {{"mu", num(rep.calibration.mu)}, {"sigma_c", rep.calibration.sigma_c}}},
                     {"estimators", std::move(est)}});
  }
  return cells.dump(2) + "\n";
}

std::string timing_csv(const std::vector<McReport>& reports) {
  std::string out = "scenario,n,censor_rate,estimator,mean_runtime_s,replicates\n";
  for (const auto& rep : reports)
    for (const auto& s : rep.estimators)
      out += fmt::format("{},{},{:.17g},{},{},{}\n", rep.cell.scenario, rep.cell.n, rep.cell.censor_rate,
                         to_string(s.kind), format_value(s.mean_runtime_s), s.n_replicates);
  return out;
}

void summarize(const std::vector<McReport>& reports, const std::filesystem::path& out_dir) {
  const auto csv = report_csv(reports);
  const auto json = report_json(reports);
  const auto timing = timing_csv(reports);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(fmt::format("cannot create output directory '{}': {}", out_dir.string(), ec.message()));
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    f << text;
    if (!f.flush()) throw Error(fmt::format("write failed for '{}'", path.string()));
  };
  write(out_dir / "report.csv", csv);
  write(out_dir / "report.json", json);
  write(out_dir / "timing.csv", timing);
}

}  // namespace ctsls
