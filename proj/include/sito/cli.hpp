#pragma once

#include <map>
#include <string>
#include <vector>

namespace sito::cli {

/// Raised for malformed configs; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Resolved run configuration. Defaults match the documented minimal file.
struct Config {
  std::string experiment = "convergence";

  double grid_length = 40.0;
  int grid_n = 512;

  std::string symbol_name = "gaussian_well";
  std::map<std::string, double> symbol_params;  // includes mu1/mu2

  double init_center = 0.0;
  double init_width = 1.0;
  double init_momentum = 0.0;

  double horizon = 1.0;
  std::vector<int> steps{8, 16, 32, 64};
  int ref_substeps = 16;
  std::string ref_scheme = "exponential-em";
  int trajectories = 100;
  uint64_t seed = 42;
  double tau = 0.0;
  int workers = 0;

  std::string out_dir = "out";
  bool write_csv = true;
  bool write_json = true;
  int verbosity = 1;
};

/// Strict sectioned key=value parser; unknown sections/keys are errors.
Config parse_config_file(const std::string& path);

/// Applies a "section.key=value" override (flag form); strict like the file.
void apply_override(Config* cfg, const std::string& dotted_key,
                    const std::string& value);

/// Runs the configured experiment and writes results.csv, results.json and
/// manifest.json into the output directory.
/// Exit status: 0 ok, 1 assertion failure, 2 config error, 3 blow-up policy.
int run_experiment(const Config& cfg);

}  // namespace sito::cli
