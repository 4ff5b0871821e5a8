#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "ctsls/dataset.hpp"
#include "ctsls/error.hpp"
#include "ctsls/estimator.hpp"

namespace ctsls::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

json number(double v) { return std::isfinite(v) ? json(v) : json(); }

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_file(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open {} '{}'", what, path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
  out << text;
  if (!out.flush()) throw Error(fmt::format("write failed for '{}'", path.string()));
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("{}: {}", what, e.what()));
  }
}

Eigen::VectorXd to_vector(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (auto x : v) a.push_back(number(x));
  return a;
}

// Applies one simulation key; returns false when the key is not a simulation key.
bool apply_sim_key(SimConfig& c, const std::string& key, const json& value) {
  if (key == "n") c.n = value.get<std::size_t>();
  else if (key == "censor_rate") c.censor_rate = value.get<double>();
  else if (key == "scenario") c.scenario = ErrorScenario::by_id(value.get<int>());
  else if (key == "seed") c.seed = value.get<std::uint64_t>();
  else if (key == "calibration_pop") c.calibration_pop = value.get<std::size_t>();
  else if (key == "instrument_sd") c.instrument_sd = value.get<double>();
  else if (key == "confounder_sd") c.confounder_sd = value.get<double>();
  else if (key == "alpha1") c.params.alpha1 = to_vector(value);
  else if (key == "alpha2") c.params.alpha2 = to_vector(value);
  else if (key == "beta1") c.params.beta1 = value.get<double>();
  else if (key == "beta2") c.params.beta2 = to_vector(value);
  else return false;
  return true;
}

json error_json(const std::string& type, const std::string& message) {
  return {{"error", {{"type", type}, {"message", message}}}};
}

json fit_json(const FitResult& fit, double wall_time_s) {
  json params = json::array();
  for (std::size_t k = 0; k < fit.names.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    params.push_back({{"name", fit.names[k]},
                      {"estimate", number(fit.estimate[i])},
                      {"std_error", number(fit.std_errors[i])},
                      {"ci_lower", number(fit.conf_intervals[k].first)},
                      {"ci_upper", number(fit.conf_intervals[k].second)},
                      {"p_value", number(fit.p_values[i])}});
  }
  const auto& d = fit.diagnostics;
  return {{"parameters", std::move(params)},
          {"beta1", number(fit.beta1())},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"wall_time_s", wall_time_s},
          {"diagnostics",
           {{"a_condition", number(d.a_condition)},
            {"clamp_activations", d.clamp_activations},
            {"tail_truncated", d.tail_truncated},
            {"first_stage_r2", number(d.first_stage_r2)},
            {"censored_fraction", d.censored_fraction}}}};
}

std::string fit_table(const std::vector<FitResult>& fits) {
  std::string out;
  for (const auto& fit : fits) {
    out += fmt::format("{} (iterations {}, converged {})\n", fit.estimator, fit.iterations,
                       fit.converged ? "yes" : "no");
    out += fmt::format("  {:<12} {:>12} {:>11} {:>25} {:>11}\n", "parameter", "estimate", "std.err",
                       "95% CI", "p-value");
    for (std::size_t k = 0; k < fit.names.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      out += fmt::format("  {:<12} {:>12.6f} {:>11.6f} [{:>11.6f}, {:>11.6f}] {:>11.4g}\n", fit.names[k],
                         fit.estimate[i], fit.std_errors[i], fit.conf_intervals[k].first,
                         fit.conf_intervals[k].second, fit.p_values[i]);
    }
  }
  return out;
}

std::size_t resolve_threads(int flag) {
  if (flag >= 0) return static_cast<std::size_t>(flag);
  if (const char* env = std::getenv("CTSLS_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0) throw InputError(fmt::format("CTSLS_THREADS='{}' is not a thread count", env));
    return static_cast<std::size_t>(v);
  }
  return 0;
}

struct FitArgs {
  std::string input, output, schema;
  double tol = 1e-3;
  int kmax = 10;
  bool unweighted = false;
  bool raw_time = false;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  ColumnSpec spec = a.schema.empty() ? ColumnSpec{} : ColumnSpec::from_json_file(a.schema);
  if (a.raw_time) spec.raw_time = true;
  const auto sample = load_csv(a.input, spec);
  const auto warnings = validate(sample);

  FitOptions opts;
  opts.tol = a.tol;
  opts.kmax = a.kmax;

  std::vector<FitResult> fits;
  json estimators = json::object();
  auto record = [&](FitResult fit, Clock::time_point t0) {
    estimators[fit.estimator] = fit_json(fit, seconds_since(t0));
    fits.push_back(std::move(fit));
  };
  bool converged = true;
  if (!a.unweighted) {
    const auto t0 = Clock::now();
    auto fit = fit_ctsls(sample, opts);
    converged = fit.converged;
    record(std::move(fit), t0);
  }
  {
    const auto t0 = Clock::now();
    opts.weighted = false;
    record(fit_ctsls(sample, opts), t0);
  }
  {
    const auto t0 = Clock::now();
    record(fit_cols(sample, opts.level), t0);
  }

  const json report{{"input", a.input},
                    {"n", sample.n()},
                    {"p", sample.p()},
                    {"q", sample.q()},
                    {"events", sample.event_count()},
                    {"censored_fraction", sample.censored_fraction()},
                    {"first_stage_r2", number(fits.front().diagnostics.first_stage_r2)},
                    {"options", {{"tol", a.tol}, {"kmax", a.kmax}, {"weighted", !a.unweighted}, {"level", opts.level}}},
                    {"warnings", warnings},
                    {"estimators", std::move(estimators)},
                    {"wall_time_s", seconds_since(start)}};
  if (a.output.empty()) {
    out << report.dump(2) << '\n';
  } else {
    write_file(a.output, report.dump(2) + "\n");
    out << fit_table(fits);
    for (const auto& w : warnings) out << "warning: " << w << '\n';
  }
  return converged ? kExitOk : kExitNotConverged;
}

struct SimulateArgs {
  std::string input, output;
  std::optional<std::uint64_t> seed;
  bool raw_time = false;
};

fs::path sidecar_path(const fs::path& csv) {
  auto p = csv;
  p.replace_extension(".truth.json");
  return p;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  auto config = sim_config_from_json(read_file(a.input, "simulation config"));
  if (a.seed) config.seed = *a.seed;
  config.validate();
  Rng rng(config.seed);
  const auto data = generate_dataset(config, rng);

  write_file(a.output, to_csv(data.sample, a.raw_time));
  const auto& cal = data.calibration;
  const json sidecar{
      {"csv", fs::path(a.output).filename().string()},
      {"raw_time", a.raw_time},
      {"seed", config.seed},
      {"n", config.n},
      {"scenario", config.scenario.name},
      {"censor_rate_target", config.censor_rate},
      {"censored_fraction", data.sample.censored_fraction()},
      {"calibration", {{"mu", number(cal.mu)}, {"sigma_c", cal.sigma_c}, {"achieved_fraction", cal.achieved_fraction}}},
      {"truth",
       {{"alpha1", to_json(config.params.alpha1)},
        {"alpha2", to_json(config.params.alpha2)},
        {"beta1", data.oracle.beta1_true},
        {"beta2", to_json(config.params.beta2)}}},
      {"y_true", to_json(data.oracle.y_true)},
      {"c_true", to_json(data.oracle.c_true)}};
  const auto side = sidecar_path(a.output);
  write_file(side, sidecar.dump(2) + "\n");
  out << fmt::format("wrote {} ({} subjects, censored fraction {:.4f}) and {}\n", a.output, config.n,
                     data.sample.censored_fraction(), side.string());
  return kExitOk;
}

struct BenchmarkArgs {
  std::string grid, output;
  std::optional<std::size_t> replicates;
  std::optional<std::uint64_t> seed;
  int threads = -1;
};

int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out, std::ostream& err) {
  auto spec = grid_from_json(read_file(a.grid, "grid file"));
  if (a.replicates) spec.harness.replicates = *a.replicates;
  if (a.seed) spec.harness.master_seed = *a.seed;
  spec.harness.threads = resolve_threads(a.threads);
  spec.harness.progress = [&err](const std::string& msg) { err << "[benchmark] " << msg << '\n' << std::flush; };

  const auto reports = run_grid(spec.cells, spec.harness);
  summarize(reports, a.output);

  bool all_converged = true;
  for (const auto& rep : reports) {
    for (const auto& s : rep.estimators) {
      if (s.n_converged + s.n_failed < s.n_replicates) all_converged = false;
      out << fmt::format("{:<18} n={:<6} pi_c={:<5} {:<17} bias={:+.4f} emp_var={:.3e} sand_var={:.3e} cover={:.3f}\n",
                         rep.cell.scenario, rep.cell.n, rep.cell.censor_rate, to_string(s.kind), s.mean_bias,
                         s.empirical_var, s.mean_sandwich_var, s.coverage_95);
    }
  }
  out << fmt::format("reports written to {}\n", a.output);
  return all_converged ? kExitOk : kExitNotConverged;
}

}  // namespace

SimConfig sim_config_from_json(const std::string& text) {
  const auto j = parse_json(text, "simulation config");
  if (!j.is_object()) throw InputError("simulation config must be a JSON object");
  SimConfig c;
  try {
    for (const auto& [key, value] : j.items())
      if (!apply_sim_key(c, key, value)) throw InputError(fmt::format("simulation config: unknown key '{}'", key));
  } catch (const json::exception& e) {
    throw InputError(fmt::format("simulation config: {}", e.what()));
  }
  return c;
}

GridSpec grid_from_json(const std::string& text) {
  const auto j = parse_json(text, "grid JSON");
  if (!j.is_object()) throw InputError("grid JSON must be an object");
  GridSpec spec;
  SimConfig base;
  std::vector<std::size_t> ns{base.n};
  std::vector<double> rates{base.censor_rate};
  std::vector<int> scenarios{1};
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n") ns = value.get<std::vector<std::size_t>>();
      else if (key == "censor_rate") rates = value.get<std::vector<double>>();
      else if (key == "scenario") scenarios = value.get<std::vector<int>>();
      else if (key == "replicates") spec.harness.replicates = value.get<std::size_t>();
      else if (key == "seed") spec.harness.master_seed = value.get<std::uint64_t>();
      else if (key == "tol") spec.harness.fit.tol = value.get<double>();
      else if (key == "kmax") spec.harness.fit.kmax = value.get<int>();
      else if (key == "estimators") {
        spec.harness.estimators.clear();
        for (const auto& name : value.get<std::vector<std::string>>()) {
          const auto kind = parse_estimator(name);
          if (!kind) throw InputError(fmt::format("grid JSON: unknown estimator '{}'", name));
          spec.harness.estimators.push_back(*kind);
        }
      } else if (!apply_sim_key(base, key, value)) {
        throw InputError(fmt::format("grid JSON: unknown key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw InputError(fmt::format("grid JSON: {}", e.what()));
  }
  if (ns.empty() || rates.empty() || scenarios.empty())
    throw InputError("grid JSON: n, censor_rate and scenario lists must be non-empty");
  for (int s : scenarios)
    for (auto n : ns)
      for (double r : rates) {
        auto c = base;
        c.scenario = ErrorScenario::by_id(s);
        c.n = n;
        c.censor_rate = r;
        c.validate();
        spec.cells.push_back(std::move(c));
      }
  return spec;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Censored two-stage least squares for instrumental-variable AFT models"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit cTSLS (weighted, unweighted) and cOLS to a dataset CSV");
  fit_cmd->add_option("--input", fit.input, "Dataset CSV")->required();
  fit_cmd->add_option("--output", fit.output, "Write the JSON report here (default: standard output)");
  fit_cmd->add_option("--schema", fit.schema, "Column-binding JSON");
  fit_cmd->add_option("--tol", fit.tol, "Max-norm stopping tolerance")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--kmax", fit.kmax, "Maximum reweighting iterations")->check(CLI::PositiveNumber);
  fit_cmd->add_flag("--unweighted", fit.unweighted, "Skip the weighted estimator");
  fit_cmd->add_flag("--raw-time", fit.raw_time, "Time column is on the original scale");

  SimulateArgs sim;
  std::uint64_t sim_seed = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a dataset CSV and a truth sidecar JSON");
  sim_cmd->add_option("--input,--config", sim.input, "Simulation config JSON")->required();
  sim_cmd->add_option("--output", sim.output, "Output CSV")->required();
  auto* sim_seed_opt = sim_cmd->add_option("--seed", sim_seed, "Override the config seed");
  sim_cmd->add_flag("--raw-time", sim.raw_time, "Write exp(log time) in the time column");

  BenchmarkArgs bench;
  std::size_t bench_reps = 0;
  std::uint64_t bench_seed = 0;
  auto* bench_cmd = app.add_subcommand("benchmark", "Run a Monte Carlo grid and write report files");
  bench_cmd->add_option("--grid", bench.grid, "Grid JSON")->required();
  bench_cmd->add_option("--output", bench.output, "Output directory")->required();
  auto* reps_opt = bench_cmd->add_option("--replicates", bench_reps, "Replicates per cell")->check(CLI::Range(2, 1 << 30));
  auto* bench_seed_opt = bench_cmd->add_option("--seed", bench_seed, "Master seed");
  bench_cmd->add_option("--threads", bench.threads, "Worker threads (0 = all cores; default CTSLS_THREADS)")
      ->check(CLI::NonNegativeNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    out << error_json("usage_error", e.what()).dump(2) << '\n';
    err << e.what() << '\n';
    return kExitInputError;
  }
  if (sim_seed_opt->count()) sim.seed = sim_seed;
  if (reps_opt->count()) bench.replicates = bench_reps;
  if (bench_seed_opt->count()) bench.seed = bench_seed;

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, out);
    return cmd_benchmark(bench, out, err);
  } catch (const InputError& e) {
    out << error_json("input_error", e.what()).dump(2) << '\n';
  } catch (const NumericalError& e) {
    out << error_json("numerical_error", e.what()).dump(2) << '\n';
  } catch (const std::exception& e) {
    out << error_json("error", e.what()).dump(2) << '\n';
  }
  return kExitInputError;
}

}  // namespace ctsls::cli
