#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctsls/estimator.hpp"
#include "ctsls/simgen.hpp"

namespace ctsls {

enum class EstimatorKind { CtslsWeighted, CtslsUnweighted, Cols, TslsUncensored };

std::string to_string(EstimatorKind kind);
std::optional<EstimatorKind> parse_estimator(const std::string& name);
const std::vector<EstimatorKind>& all_estimators();

/// What one estimator produced on one replicate.
struct ReplicateRecord {
  double estimate = 0.0;   // beta1-hat
  double variance = 0.0;   // sandwich Var(beta1-hat)
  bool covered = false;    // 95% interval contains the true beta1
  bool converged = false;
  bool failed = false;     // estimator threw; other fields unset
  double runtime_s = 0.0;  // estimator wall time only
  std::string error;
};

struct EstimatorSummary {
  EstimatorKind kind = EstimatorKind::CtslsWeighted;
  double mean_bias = 0.0;
  double empirical_var = 0.0;
  double mean_sandwich_var = 0.0;
  double coverage_95 = 0.0;  // covered / n_converged
  double mean_estimate = 0.0;
  double rmse = 0.0;
  double mean_runtime_s = 0.0;
  std::size_t n_replicates = 0;  // replicates attempted
  std::size_t n_converged = 0;
  std::size_t n_failed = 0;
  std::vector<ReplicateRecord> records;  // in replicate order
};

struct CellId {
  std::string scenario;
  std::size_t n = 0;
  double censor_rate = 0.0;
};

struct McReport {
  CellId cell;
  Calibration calibration;
  double realized_censoring = 0.0;  // mean censored fraction over replicates
  double beta1_true = 1.0;
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary& summary(EstimatorKind kind) const;
};

struct HarnessOptions {
  std::size_t replicates = 500;
  std::uint64_t master_seed = 20240601;
  std::size_t threads = 1;  // 0 = hardware concurrency
  std::vector<EstimatorKind> estimators = all_estimators();
  FitOptions fit;
  std::function<void(const std::string&)> progress;  // optional log sink
};

/// Seed of a grid cell: derived from the master seed and the cell content
/// (scenario name, n, censoring rate), so it does not depend on grid order.
std::uint64_t cell_seed(std::uint64_t master_seed, const SimConfig& config);

/// Runs every requested estimator on `replicates` generated datasets per cell.
///
/// Replicate r of a cell draws from Rng(derive_seed(cell_seed, r)); the
/// cell's calibration uses derive_seed(cell_seed, kCalibrationStream). Work is
/// spread over a thread pool, results are stored by index and aggregated in
/// replicate order, so output is independent of the thread count. The
/// uncensored TSLS estimator only runs in cells with censor_rate == 0.
/// `config.seed` of each grid entry is ignored in favour of cell_seed().
std::vector<McReport> run_grid(const std::vector<SimConfig>& grid, const HarnessOptions& options);

/// Aggregates per-replicate records into the summary fields.
void aggregate(EstimatorSummary& summary, double beta1_true);

/// Metrics written per (cell, estimator) to the report files.
const std::vector<std::string>& report_metrics();

/// Long-format CSV: scenario,n,censor_rate,estimator,metric,value,replicates,converged.
std::string report_csv(const std::vector<McReport>& reports);
/// JSON array of cells with nested estimator maps.
std::string report_json(const std::vector<McReport>& reports);
/// Wall-time table (kept apart from the deterministic report files).
std::string timing_csv(const std::vector<McReport>& reports);

/// Writes report.csv, report.json and timing.csv into `out_dir`.
void summarize(const std::vector<McReport>& reports, const std::filesystem::path& out_dir);

}  // namespace ctsls
