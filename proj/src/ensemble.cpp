#include "sito/ensemble.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "sito/linalg.hpp"
#include "sito/noise.hpp"
#include "sito/propagator.hpp"

namespace sito {

namespace {

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void validate(const ExperimentSpec& spec) {
  if (spec.trajectories < 2)
    throw std::invalid_argument("ensemble needs at least 2 trajectories");
  if (spec.step_list.empty())
    throw std::invalid_argument("step list is empty");
  for (size_t i = 0; i < spec.step_list.size(); ++i) {
    if (spec.step_list[i] < 1 || !power_of_two(spec.step_list[i]))
      throw std::invalid_argument("step counts must be powers of two");
    if (i > 0 && spec.step_list[i] <= spec.step_list[i - 1])
      throw std::invalid_argument("step counts must be increasing");
  }
  if (spec.ref_substeps < 1 || !power_of_two(spec.ref_substeps))
    throw std::invalid_argument("ref_substeps must be a power of two >= 1");
  if (spec.tau != 0.0)
    throw std::invalid_argument("stochastic ensembles are qp-quantized (tau = 0)");
}

struct TrajResult {
  std::vector<double> w;           // per step count
  std::vector<double> prod_norm2;  // per step count
  double ref_norm2 = 0.0;
  double step_ratio = 0.0;
  bool excluded = false;
};

TrajResult run_one(const ExperimentSpec& spec, GridPtr grid,
                   const Wavefunction& psi0, int traj) {
  const int n_coarse = spec.step_list.front();
  const int n_finest = spec.step_list.back() * spec.ref_substeps;

  WienerPath path = sample_path(spec.horizon, n_coarse, spec.seed,
                                static_cast<uint64_t>(traj));
  while (path.steps < n_finest) path = refine(path);

  TrajResult out;
  out.w.resize(spec.step_list.size());
  out.prod_norm2.resize(spec.step_list.size());
  try {
    Wavefunction ref = integrate(psi0, spec.symbol, path, spec.ref_scheme);
    out.ref_norm2 = norm2(ref);

    // coarsen from the finest level so every n sees the same trajectory
    std::vector<WienerPath> levels;
    {
      WienerPath cur = path;
      while (true) {
        levels.push_back(cur);
        if (cur.steps <= n_coarse) break;
        cur = coarsen(cur);
      }
    }
    for (size_t i = 0; i < spec.step_list.size(); ++i) {
      int n = spec.step_list[i];
      const WienerPath* lvl = nullptr;
      for (const auto& l : levels)
        if (l.steps == n) lvl = &l;
      if (!lvl) throw std::logic_error("missing coarsened level");
      StepPlan plan{spec.symbol, grid, spec.horizon, n, spec.tau, *lvl};
      PropagateResult pr = propagate_detailed(psi0, plan);
      if (pr.blew_up) {
        out.excluded = true;
        return out;
      }
      Wavefunction diff = pr.state;
      diff.values -= ref.values;
      out.w[i] = norm2(diff);
      out.prod_norm2[i] = norm2(pr.state);
      if (n == spec.step_list.back()) out.step_ratio = pr.max_step_norm_ratio;
    }
  } catch (const BlowupError&) {
    out.excluded = true;
  }
  return out;
}

std::vector<double> column(const std::vector<TrajResult>& rs,
                           const std::vector<int>& keep, size_t i,
                           bool prod_norm) {
  std::vector<double> col;
  col.reserve(keep.size());
  for (int t : keep)
    col.push_back(prod_norm ? rs[t].prod_norm2[i] : rs[t].w[i]);
  return col;
}

}  // namespace

EnsembleStats run(const ExperimentSpec& spec) {
  validate(spec);
  auto t_start = std::chrono::steady_clock::now();

  GridPtr grid = make_grid(spec.grid_length, spec.grid_n);
  Wavefunction psi0 = gaussian_packet(grid, spec.init_center, spec.init_width,
                                      spec.init_momentum);

  const int m = spec.trajectories;
  std::vector<TrajResult> results(m);
  int workers = spec.workers > 0
                    ? spec.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, m));

  std::atomic<int> next{0};
  auto worker_fn = [&]() {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= m) return;
      results[i] = run_one(spec, grid, psi0, i);
    }
  };
  if (workers == 1) {
    worker_fn();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
    for (auto& th : pool) th.join();
  }

  // Reduction is keyed by trajectory index, never by arrival order.
  std::vector<int> keep;
  keep.reserve(m);
  int excluded = 0;
  for (int i = 0; i < m; ++i) {
    if (results[i].excluded)
      ++excluded;
    else
      keep.push_back(i);
  }
  if (excluded > 0 && excluded * 100 > m)
    throw ExclusionPolicyError("more than 1% of trajectories blew up (" +
                               std::to_string(excluded) + " of " +
                               std::to_string(m) + ")");
  if (keep.size() < 2) throw std::runtime_error("not enough surviving trajectories");

  EnsembleStats st;
  st.steps = spec.step_list;
  st.excluded = excluded;
  st.trajectories = m;
  st.init_norm2 = norm2(psi0);
  for (size_t i = 0; i < spec.step_list.size(); ++i) {
    MeanStderr w = mean_stderr(column(results, keep, i, false));
    MeanStderr p = mean_stderr(column(results, keep, i, true));
    st.w_mean.push_back(w.mean);
    st.w_stderr.push_back(w.stderr_);
    st.prod_norm2_mean.push_back(p.mean);
    st.prod_norm2_stderr.push_back(p.stderr_);
  }
  {
    std::vector<double> refn, ratio;
    for (int t : keep) {
      refn.push_back(results[t].ref_norm2);
      ratio.push_back(results[t].step_ratio);
    }
    MeanStderr r = mean_stderr(refn), q = mean_stderr(ratio);
    st.ref_norm2_mean = r.mean;
    st.ref_norm2_stderr = r.stderr_;
    st.step_norm_ratio_mean = q.mean;
    st.step_norm_ratio_stderr = q.stderr_;
  }
  if (st.steps.size() >= 3) {
    std::vector<double> ns(st.steps.begin(), st.steps.end());
    bool positive = true;
    for (double wv : st.w_mean)
      if (!(wv > 0.0)) positive = false;
    if (positive) {
      LogLogFit f = fit_loglog(ns, st.w_mean, /*drop_coarsest_outlier=*/true);
      st.slope = -f.fit.slope;  // decay order, positive when converging
      st.slope_stderr = f.fit.slope_stderr;
      st.dropped_coarsest = f.dropped_first;
    }
  }
  auto t_end = std::chrono::steady_clock::now();
  st.wall_seconds = std::chrono::duration<double>(t_end - t_start).count();
  st.per_traj_seconds = st.wall_seconds / m;
  return st;
}

MartingaleReport martingale_report(const ExperimentSpec& spec) {
  if (!spec.symbol.separable)
    throw std::invalid_argument(
        "martingale_report requires a separable real Hamiltonian");
  EnsembleStats st = run(spec);
  MartingaleReport rep;
  rep.init_norm2 = st.init_norm2;
  rep.prod_mean = st.prod_norm2_mean.back();
  rep.prod_stderr = st.prod_norm2_stderr.back();
  rep.ref_mean = st.ref_norm2_mean;
  rep.ref_stderr = st.ref_norm2_stderr;
  rep.prod_z = rep.prod_stderr > 0.0
                   ? (rep.prod_mean - st.init_norm2) / rep.prod_stderr
                   : 0.0;
  rep.ref_z = rep.ref_stderr > 0.0
                  ? (rep.ref_mean - st.init_norm2) / rep.ref_stderr
                  : 0.0;
  return rep;
}

}  // namespace sito
