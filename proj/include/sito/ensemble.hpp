#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sito/grid.hpp"
#include "sito/reference.hpp"
#include "sito/symbols.hpp"

namespace sito {

/// More than 1% of trajectories were excluded by the blow-up guard.
class ExclusionPolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One convergence study: matched (product, reference) trajectory pairs on
/// common bridge-coupled noise, for every step count in `step_list`.
struct ExperimentSpec {
  SymbolModel symbol;
  double grid_length = 40.0;
  int grid_n = 512;
  double init_center = 0.0;
  double init_width = 1.0;
  double init_momentum = 0.0;
  double horizon = 1.0;
  std::vector<int> step_list{8, 16, 32, 64};
  int ref_substeps = 16;
  Scheme ref_scheme = Scheme::exponential_em;
  int trajectories = 100;
  uint64_t seed = 42;
  double tau = 0.0;
  int workers = 0;  // 0 = hardware concurrency
};

struct EnsembleStats {
  std::vector<int> steps;
  // w-metric E||phi_prod(n) - phi_ref||^2 per step count
  std::vector<double> w_mean, w_stderr;
  // E||phi||^2 per step count (product) and for the reference
  std::vector<double> prod_norm2_mean, prod_norm2_stderr;
  double ref_norm2_mean = 0.0, ref_norm2_stderr = 0.0;
  double init_norm2 = 0.0;
  // log2-log2 OLS of the w-metric against n
  double slope = 0.0, slope_stderr = 0.0;
  bool dropped_coarsest = false;
  // mean over trajectories of max_j ||phi_{j+1}||/||phi_j|| at the finest n
  double step_norm_ratio_mean = 0.0, step_norm_ratio_stderr = 0.0;
  int excluded = 0;
  int trajectories = 0;
  double wall_seconds = 0.0, per_traj_seconds = 0.0;
};

/// Runs the study. Deterministic (bit-identical numeric fields) for a fixed
/// spec and seed, independent of worker count. Throws std::runtime_error when
/// more than 1% of trajectories blow up.
EnsembleStats run(const ExperimentSpec& spec);

struct MartingaleReport {
  double init_norm2 = 0.0;
  double prod_mean = 0.0, prod_stderr = 0.0, prod_z = 0.0;
  double ref_mean = 0.0, ref_stderr = 0.0, ref_z = 0.0;
};

/// z-scores of (mean ||phi(t)||^2 - ||phi0||^2) / stderr for the product
/// (finest n) and reference pipelines. Requires separable real dynamics.
MartingaleReport martingale_report(const ExperimentSpec& spec);

}  // namespace sito
