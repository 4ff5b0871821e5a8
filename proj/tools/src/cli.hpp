#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ctsls/mc_harness.hpp"
#include "ctsls/simgen.hpp"

namespace ctsls::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNotConverged = 1;
inline constexpr int kExitInputError = 2;

/// Parses a simulation config object. Keys: n, censor_rate, scenario (1|2),
/// seed, calibration_pop, instrument_sd, confounder_sd, alpha1, alpha2,
/// beta1, beta2. Unknown keys are rejected.
SimConfig sim_config_from_json(const std::string& text);

struct GridSpec {
  std::vector<SimConfig> cells;
  HarnessOptions harness;
};

/// Parses a benchmark grid. Lists `n`, `censor_rate` and `scenario` are
/// crossed (scenario outermost); `replicates`, `seed`, `estimators` and the
/// simulation keys of sim_config_from_json apply to every cell.
GridSpec grid_from_json(const std::string& text);

/// Runs the command line (argv[0] excluded). Machine-readable output goes to
/// `out`, progress and usage errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctsls::cli
