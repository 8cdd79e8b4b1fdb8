#include "sito/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "sito/ensemble.hpp"
#include "sito/linalg.hpp"
#include "sito/noise.hpp"
#include "sito/propagator.hpp"
#include "sito/quantize.hpp"
#include "sito/version.hpp"

namespace sito::cli {

namespace {

using json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& section, const std::string& key,
                 const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError("value of " + section + "." + key + " is not a number: '" + v + "'");
  }
}

int to_int(const std::string& section, const std::string& key, const std::string& v) {
  double d = to_double(section, key, v);
  if (d != std::floor(d))
    throw ConfigError("value of " + section + "." + key + " must be an integer");
  return static_cast<int>(d);
}

uint64_t to_u64(const std::string& section, const std::string& key,
                const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return u;
  } catch (...) {
    throw ConfigError("value of " + section + "." + key +
                      " is not an unsigned integer: '" + v + "'");
  }
}

const char* kExperiments =
    "convergence, martingale, identities, expansion, noise_stats";

void set_key(Config* cfg, const std::string& section, const std::string& key,
             const std::string& value) {
  if (section == "experiment") {
    if (key == "kind") {
      static const char* known[] = {"convergence", "martingale", "identities",
                                    "expansion", "noise_stats"};
      for (const char* k : known)
        if (value == k) {
          cfg->experiment = value;
          return;
        }
      throw ConfigError("unknown experiment kind '" + value +
                        "' (allowed: " + kExperiments + ")");
    }
    throw ConfigError("unknown key 'experiment." + key + "' (allowed: kind)");
  }
  if (section == "grid") {
    if (key == "length") { cfg->grid_length = to_double(section, key, value); return; }
    if (key == "points") { cfg->grid_n = to_int(section, key, value); return; }
    throw ConfigError("unknown key 'grid." + key + "' (allowed: length, points)");
  }
  if (section == "symbol") {
    if (key == "name") { cfg->symbol_name = value; return; }
    // numeric parameters are passed through; the builtin validates names
    cfg->symbol_params[key] = to_double(section, key, value);
    return;
  }
  if (section == "initial") {
    if (key == "center") { cfg->init_center = to_double(section, key, value); return; }
    if (key == "width") { cfg->init_width = to_double(section, key, value); return; }
    if (key == "momentum") { cfg->init_momentum = to_double(section, key, value); return; }
    throw ConfigError("unknown key 'initial." + key +
                      "' (allowed: center, width, momentum)");
  }
  if (section == "run") {
    if (key == "horizon") { cfg->horizon = to_double(section, key, value); return; }
    if (key == "steps") {
      std::vector<int> steps;
      for (const auto& part : split(value, ','))
        steps.push_back(to_int(section, key, part));
      if (steps.empty()) throw ConfigError("run.steps must not be empty");
      cfg->steps = steps;
      return;
    }
    if (key == "ref_substeps") { cfg->ref_substeps = to_int(section, key, value); return; }
    if (key == "ref_scheme") {
      scheme_from_name(value);  // validates
      cfg->ref_scheme = value;
      return;
    }
    if (key == "trajectories") { cfg->trajectories = to_int(section, key, value); return; }
    if (key == "seed") { cfg->seed = to_u64(section, key, value); return; }
    if (key == "tau") { cfg->tau = to_double(section, key, value); return; }
    if (key == "workers") { cfg->workers = to_int(section, key, value); return; }
    throw ConfigError("unknown key 'run." + key +
                      "' (allowed: horizon, steps, ref_substeps, ref_scheme, "
                      "trajectories, seed, tau, workers)");
  }
  if (section == "output") {
    if (key == "dir") { cfg->out_dir = value; return; }
    if (key == "formats") {
      cfg->write_csv = false;
      cfg->write_json = false;
      for (const auto& f : split(value, ',')) {
        if (f == "csv") cfg->write_csv = true;
        else if (f == "json") cfg->write_json = true;
        else throw ConfigError("unknown output format '" + f + "' (allowed: csv, json)");
      }
      return;
    }
    if (key == "verbosity") { cfg->verbosity = to_int(section, key, value); return; }
    throw ConfigError("unknown key 'output." + key +
                      "' (allowed: dir, formats, verbosity)");
  }
  throw ConfigError("unknown section '[" + section +
                    "]' (allowed: experiment, grid, symbol, initial, run, output)");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Row {
  std::string experiment;
  long n = 0;
  long m = 0;
  uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;
};

struct Outcome {
  std::vector<Row> rows;
  json results;
  std::vector<std::string> failures;
};

SymbolModel make_symbol(const Config& cfg) {
  return builtin(cfg.symbol_name, cfg.symbol_params);
}

ExperimentSpec make_spec(const Config& cfg) {
  ExperimentSpec spec;
  spec.symbol = make_symbol(cfg);
  spec.grid_length = cfg.grid_length;
  spec.grid_n = cfg.grid_n;
  spec.init_center = cfg.init_center;
  spec.init_width = cfg.init_width;
  spec.init_momentum = cfg.init_momentum;
  spec.horizon = cfg.horizon;
  spec.step_list = cfg.steps;
  spec.ref_substeps = cfg.ref_substeps;
  spec.ref_scheme = scheme_from_name(cfg.ref_scheme);
  spec.trajectories = cfg.trajectories;
  spec.seed = cfg.seed;
  spec.tau = cfg.tau;
  spec.workers = cfg.workers;
  return spec;
}

void warn_bounds(const Config& cfg, const SymbolModel& s) {
  if (cfg.verbosity < 1) return;
  if (s.out_of_hypotheses && (s.mu1 > 0.0 || s.mu2 > 0.0))
    std::cerr << "note: symbol '" << s.name
              << "' has an unbounded internal Hamiltonian; stochastic runs are "
                 "outside the norm-estimate hypotheses\n";
  if (s.mu2 > 0.0 && s.h_bound >= 1.0)
    std::cerr << "note: sup|h| = " << s.h_bound
              << " >= 1 (the momentum-noise expansion is stated for sup|h| < 1)\n";
}

// --- experiments ---------------------------------------------------------

Outcome run_convergence(const Config& cfg) {
  ExperimentSpec spec = make_spec(cfg);
  warn_bounds(cfg, spec.symbol);
  EnsembleStats st = sito::run(spec);

  Outcome out;
  auto& r = out.rows;
  for (size_t i = 0; i < st.steps.size(); ++i) {
    r.push_back({cfg.experiment, st.steps[i], cfg.trajectories, cfg.seed,
                 "w_metric", st.w_mean[i], st.w_stderr[i]});
    r.push_back({cfg.experiment, st.steps[i], cfg.trajectories, cfg.seed,
                 "prod_norm2", st.prod_norm2_mean[i], st.prod_norm2_stderr[i]});
  }
  r.push_back({cfg.experiment, 0, cfg.trajectories, cfg.seed, "ref_norm2",
               st.ref_norm2_mean, st.ref_norm2_stderr});
  r.push_back({cfg.experiment, 0, cfg.trajectories, cfg.seed, "init_norm2",
               st.init_norm2, 0.0});
  r.push_back({cfg.experiment, 0, cfg.trajectories, cfg.seed, "slope", st.slope,
               st.slope_stderr});
  r.push_back({cfg.experiment, 0, cfg.trajectories, cfg.seed, "step_norm_ratio",
               st.step_norm_ratio_mean, st.step_norm_ratio_stderr});
  r.push_back({cfg.experiment, 0, cfg.trajectories, cfg.seed, "excluded",
               static_cast<double>(st.excluded), 0.0});

  out.results = {
      {"steps", st.steps},
      {"w_mean", st.w_mean},
      {"w_stderr", st.w_stderr},
      {"prod_norm2_mean", st.prod_norm2_mean},
      {"prod_norm2_stderr", st.prod_norm2_stderr},
      {"ref_norm2_mean", st.ref_norm2_mean},
      {"ref_norm2_stderr", st.ref_norm2_stderr},
      {"init_norm2", st.init_norm2},
      {"slope", st.slope},
      {"slope_stderr", st.slope_stderr},
      {"dropped_coarsest", st.dropped_coarsest},
      {"step_norm_ratio_mean", st.step_norm_ratio_mean},
      {"step_norm_ratio_stderr", st.step_norm_ratio_stderr},
      {"excluded", st.excluded},
      {"trajectories", st.trajectories},
      {"wall_seconds", st.wall_seconds},
      {"per_traj_seconds", st.per_traj_seconds},
  };

  int inversions = 0;
  for (size_t i = 0; i + 1 < st.w_mean.size(); ++i) {
    if (st.w_mean[i + 1] > st.w_mean[i]) {
      double slack = std::max(st.w_stderr[i], st.w_stderr[i + 1]);
      if (st.w_mean[i + 1] - st.w_mean[i] > slack || ++inversions > 1)
        out.failures.push_back("w_metric not decreasing from n=" +
                               std::to_string(st.steps[i]) + " to n=" +
                               std::to_string(st.steps[i + 1]));
    }
  }
  if (!(st.slope > 0.0))
    out.failures.push_back("fitted convergence slope is not positive");
  return out;
}

Outcome run_martingale(const Config& cfg) {
  ExperimentSpec spec = make_spec(cfg);
  warn_bounds(cfg, spec.symbol);
  MartingaleReport rep = sito::martingale_report(spec);
  Outcome out;
  long m = cfg.trajectories;
  out.rows.push_back({cfg.experiment, 0, m, cfg.seed, "init_norm2", rep.init_norm2, 0.0});
  out.rows.push_back({cfg.experiment, 0, m, cfg.seed, "prod_norm2", rep.prod_mean, rep.prod_stderr});
  out.rows.push_back({cfg.experiment, 0, m, cfg.seed, "prod_z", rep.prod_z, 0.0});
  out.rows.push_back({cfg.experiment, 0, m, cfg.seed, "ref_norm2", rep.ref_mean, rep.ref_stderr});
  out.rows.push_back({cfg.experiment, 0, m, cfg.seed, "ref_z", rep.ref_z, 0.0});
  out.results = {
      {"init_norm2", rep.init_norm2},
      {"prod_norm2_mean", rep.prod_mean}, {"prod_norm2_stderr", rep.prod_stderr},
      {"prod_z", rep.prod_z},
      {"ref_norm2_mean", rep.ref_mean}, {"ref_norm2_stderr", rep.ref_stderr},
      {"ref_z", rep.ref_z},
  };
  if (std::abs(rep.prod_z) >= 4.0)
    out.failures.push_back("product pipeline martingale |z| >= 4");
  if (std::abs(rep.ref_z) >= 4.0)
    out.failures.push_back("reference pipeline martingale |z| >= 4");
  return out;
}

Outcome run_identities(const Config& cfg) {
  Outcome out;
  const uint64_t seed = cfg.seed;
  GridPtr g128 = make_grid(32.0, 128);
  GridPtr g64 = make_grid(16.0, 64);

  auto gauss1 = [](double a, double b, double c) {
    return [a, b, c](double x) { return cplx(c * std::exp(-a * (x - b) * (x - b)), 0.0); };
  };

  // factorization identity hat(f1 f2 f3) = f1hat f2hat f3hat, 20 random draws
  double worst_fact = 0.0;
  for (uint32_t i = 0; i < 20; ++i) {
    double u[8];
    rng::uniform_pair(seed, {i, 3, 5, 0, 0}, &u[0], &u[1]);
    rng::uniform_pair(seed, {i, 3, 5, 0, 1}, &u[2], &u[3]);
    rng::uniform_pair(seed, {i, 3, 5, 0, 2}, &u[4], &u[5]);
    rng::uniform_pair(seed, {i, 3, 5, 0, 3}, &u[6], &u[7]);
    auto f1 = gauss1(0.2 + u[0], 2.0 * u[1] - 1.0, 0.5 + u[2]);
    auto f3 = gauss1(0.2 + u[3], 2.0 * u[4] - 1.0, 0.5 + u[5]);
    double aq = 0.3 + u[6], ap = 0.3 + u[7];
    auto f2 = PhaseSpaceFn::general([aq, ap](double q, double p) {
      return cplx(std::exp(-aq * q * q - ap * p * p), 0.0);
    });
    Wavefunction psi = random_smooth_state(g128, seed, 100 + i);
    worst_fact = std::max(worst_fact,
                          factorization_check(f1, f2, f3, psi) / norm(psi));
  }
  out.rows.push_back({cfg.experiment, 128, 20, seed, "factorization_residual",
                      worst_fact, 0.0});
  if (!(worst_fact < 1e-9))
    out.failures.push_back("factorization residual >= 1e-9");

  // B == U on random states and increments
  SymbolModel sym = builtin("gaussian_well", {{"mu1", 0.25}, {"mu2", 0.25}});
  double worst_bu = 0.0;
  const double v = 0.05;
  for (uint32_t i = 0; i < 20; ++i) {
    Wavefunction psi = random_smooth_state(g128, seed, 200 + i);
    double dw1 = std::sqrt(v) * rng::gaussian(seed, {i, 0, 5, 1, 0});
    double dw2 = std::sqrt(v) * rng::gaussian(seed, {i, 1, 5, 1, 0});
    Wavefunction bu = apply_B(psi, sym, dw1, dw2, v);
    Wavefunction uu = apply_U(psi, sym, dw1, dw2, v);
    bu.values -= uu.values;
    worst_bu = std::max(worst_bu, norm(bu) / norm(psi));
  }
  out.rows.push_back({cfg.experiment, 128, 20, seed, "b_minus_u_residual",
                      worst_bu, 0.0});
  if (!(worst_bu < 1e-9)) out.failures.push_back("B vs U residual >= 1e-9");

  // tau-independence for a sum symbol f(q) + g(p)
  auto sum_sym = PhaseSpaceFn::general([](double q, double p) {
    return cplx(-std::exp(-q * q) + std::exp(-0.5 * p * p), 0.0);
  });
  double worst_tau = 0.0;
  {
    Eigen::MatrixXcd k0 = quantize_dense(sum_sym, 0.0, g64).kernel();
    Eigen::MatrixXcd k5 = quantize_dense(sum_sym, 0.5, g64).kernel();
    Eigen::MatrixXcd k1 = quantize_dense(sum_sym, 1.0, g64).kernel();
    for (uint32_t i = 0; i < 5; ++i) {
      Wavefunction psi = random_smooth_state(g64, seed, 300 + i);
      double n0 = ((k5 - k0) * psi.values).norm() * std::sqrt(g64->dq);
      double n1 = ((k1 - k0) * psi.values).norm() * std::sqrt(g64->dq);
      worst_tau = std::max(worst_tau, std::max(n0, n1) / norm(psi));
    }
  }
  out.rows.push_back({cfg.experiment, 64, 5, seed, "tau_independence_residual",
                      worst_tau, 0.0});
  if (!(worst_tau < 1e-8))
    out.failures.push_back("tau-independence residual >= 1e-8");

  // box-limit quadrature against the spectral path
  {
    auto symfn = PhaseSpaceFn::general([](double q, double p) {
      return cplx(std::exp(-q * q - p * p), 0.0);
    });
    Wavefunction psi = gaussian_packet(g64);
    double full = std::min(0.5 * g64->length, 0.5 * g64->dp * g64->n);
    std::vector<double> errs = verify_box_limit(symfn, psi, {2.0, 4.0, full});
    for (size_t i = 0; i < errs.size(); ++i)
      out.rows.push_back({cfg.experiment, 64, 1, seed,
                          "box_limit_err_" + std::to_string(i), errs[i], 0.0});
    if (!(errs[0] > errs[1] && errs[1] > errs[2]))
      out.failures.push_back("box-limit errors not decreasing in z");
    if (!(errs.back() < 1e-10))
      out.failures.push_back("box-limit error at full extent >= 1e-10");
    std::vector<double> id_err = verify_box_limit(
        PhaseSpaceFn::product(nullptr, nullptr), psi, {7.0});
    out.rows.push_back({cfg.experiment, 64, 1, seed, "box_limit_identity",
                        id_err[0], 0.0});
    if (!(id_err[0] < 1e-8))
      out.failures.push_back("identity-symbol box error >= 1e-8");
  }

  // self-adjointness of a real separable symbol
  {
    QuantizedOperator op = quantize(sum_sym, 0.0, g64);
    double worst = 0.0;
    for (uint32_t i = 0; i < 5; ++i) {
      Wavefunction a = random_smooth_state(g64, seed, 400 + 2 * i);
      Wavefunction b = random_smooth_state(g64, seed, 401 + 2 * i);
      cplx lhs = inner(op.apply(a), b), rhs = inner(a, op.apply(b));
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    out.rows.push_back({cfg.experiment, 64, 5, seed, "self_adjointness", worst, 0.0});
    if (!(worst < 1e-8)) out.failures.push_back("self-adjointness residual >= 1e-8");
  }

  for (const auto& row : out.rows) out.results[row.metric] = row.value;
  return out;
}

Outcome run_expansion(const Config& cfg) {
  Outcome out;
  GridPtr g64 = make_grid(16.0, 64);
  const int draws = cfg.trajectories;
  std::vector<double> vs{0.1, 0.05, 0.025, 0.0125};
  SymbolModel gw = builtin("gaussian_well", {{"mu1", 0.25}, {"mu2", 0.25}});
  SymbolModel bc = builtin("bounded_coupled", {{"mu1", 0.25}, {"mu2", 0.25}});

  auto record = [&](const char* name, const ExpansionResult& r) {
    for (size_t i = 0; i < r.v.size(); ++i)
      out.rows.push_back({cfg.experiment, static_cast<long>(i), draws, cfg.seed,
                          std::string(name) + "_residual_v" + std::to_string(i),
                          r.mean_residual[i], r.stderr_[i]});
    out.rows.push_back({cfg.experiment, 0, draws, cfg.seed,
                        std::string(name) + "_slope", r.slope, 0.0});
    out.results[std::string(name) + "_slope"] = r.slope;
    out.results[std::string(name) + "_residuals"] = r.mean_residual;
  };

  ExpansionResult q = expansion_residual('Q', gw, vs, draws, cfg.seed, g64);
  record("Q", q);
  if (!(q.slope >= 1.4)) out.failures.push_back("Q expansion order < 1.4");
  ExpansionResult p = expansion_residual('P', gw, vs, draws, cfg.seed, g64);
  record("P", p);
  if (!(p.slope >= 1.4)) out.failures.push_back("P expansion order < 1.4");
  ExpansionResult u = expansion_residual('U', bc, vs, draws, cfg.seed, g64);
  record("U", u);
  if (!(u.slope >= 1.4)) out.failures.push_back("U expansion order < 1.4");

  std::vector<double> vs_low{0.05, 0.025, 0.0125, 0.00625, 0.003125};
  CrossTermResult x = cross_term_gap(bc, vs_low, draws, cfg.seed, g64);
  for (size_t i = 0; i < x.v.size(); ++i)
    out.rows.push_back({cfg.experiment, static_cast<long>(i), draws, cfg.seed,
                        "cross_gap_v" + std::to_string(i), x.gap_mean[i],
                        x.gap_stderr[i]});
  out.rows.push_back({cfg.experiment, 0, draws, cfg.seed, "cross_gap_slope",
                      x.gap_slope, 0.0});
  out.rows.push_back({cfg.experiment, 0, draws, cfg.seed, "cross_term_slope",
                      x.cross_slope, 0.0});
  out.rows.push_back({cfg.experiment, 0, draws, cfg.seed, "cross_dominance",
                      x.dominance_ratio, 0.0});
  out.rows.push_back({cfg.experiment, 0, draws, cfg.seed, "dw_product_ratio",
                      x.mean_abs_dw_product_ratio, 0.0});
  out.results["cross_gap_slope"] = x.gap_slope;
  out.results["cross_term_slope"] = x.cross_slope;
  out.results["cross_dominance"] = x.dominance_ratio;
  out.results["dw_product_ratio"] = x.mean_abs_dw_product_ratio;
  if (!(x.gap_slope >= 0.85 && x.gap_slope <= 1.15))
    out.failures.push_back("U-T gap slope outside 1.0 +- 0.15");
  if (!(std::abs(x.mean_abs_dw_product_ratio - 1.0) < 0.15))
    out.failures.push_back("E|dW1 dW2| deviates from 2v/pi by > 15%");

  ItoExpansionResult ito = ito_expansion_check(-1.0, 0.5,
                                               {0.1, 0.05, 0.025, 0.0125},
                                               10000, cfg.seed);
  for (size_t i = 0; i < ito.t.size(); ++i)
    out.rows.push_back({cfg.experiment, static_cast<long>(i), 10000, cfg.seed,
                        "ito_residual_t" + std::to_string(i),
                        ito.mean_residual[i], 0.0});
  out.rows.push_back({cfg.experiment, 0, 10000, cfg.seed, "ito_slope", ito.slope, 0.0});
  out.results["ito_slope"] = ito.slope;
  out.results["ito_residuals"] = ito.mean_residual;
  out.results["ito_oracle_error"] = ito.oracle_error;
  if (!(ito.slope >= 1.4)) out.failures.push_back("scalar Ito expansion order < 1.4");
  if (!(ito.oracle_error.back() < 0.2 * ito.mean_residual.back()))
    out.failures.push_back("Ito oracle contamination exceeds 20%");
  return out;
}

Outcome run_noise_stats(const Config& cfg) {
  Outcome out;
  const uint64_t seed = cfg.seed;
  const int big = 100000;

  // chi^2(1) - 1 law of zeta = ((dW)^2 - v)/v
  {
    const double v = 0.01;
    std::vector<double> zeta(big);
    for (int i = 0; i < big; ++i) {
      double z = rng::gaussian(seed, {static_cast<uint64_t>(i), 0, 6, 0, 0});
      double dw = std::sqrt(v) * z;
      zeta[i] = (dw * dw - v) / v;
    }
    MeanStderr ms = mean_stderr(zeta);
    double zscore = ms.mean / ms.stderr_;
    std::vector<double> dev2(big);
    for (int i = 0; i < big; ++i) dev2[i] = (zeta[i] - ms.mean) * (zeta[i] - ms.mean);
    double var = pairwise_sum(dev2) / (big - 1);
    out.rows.push_back({cfg.experiment, 0, big, seed, "zeta_mean_z", zscore, 0.0});
    out.rows.push_back({cfg.experiment, 0, big, seed, "zeta_var", var, 0.0});
    out.results["zeta_mean_z"] = zscore;
    out.results["zeta_var"] = var;
    if (!(std::abs(zscore) < 4.0)) out.failures.push_back("zeta mean |z| >= 4");
    if (!(std::abs(var - 2.0) < 0.2)) out.failures.push_back("zeta variance off by > 10%");
  }

  // Levy modulus sanity band across resolutions
  {
    const int paths = 1000;
    for (int log_n = 10; log_n <= 14; ++log_n) {
      int n = 1 << log_n;
      std::vector<double> stats(paths);
      for (int i = 0; i < paths; ++i)
        stats[i] = levy_modulus(
            sample_path(1.0, n, seed, 1000000u + static_cast<uint64_t>(i)));
      std::sort(stats.begin(), stats.end());
      double median = stats[paths / 2];
      out.rows.push_back({cfg.experiment, n, paths, seed, "levy_median", median, 0.0});
      out.results["levy_median_n" + std::to_string(n)] = median;
      if (!(median > 0.3 && median < 1.5))
        out.failures.push_back("Levy modulus median outside (0.3, 1.5) at n=" +
                               std::to_string(n));
    }
  }

  // independence of the two driving streams
  {
    std::vector<double> prod(big), a2(big), b2(big);
    for (int i = 0; i < big; ++i) {
      double a = rng::gaussian(seed, {static_cast<uint64_t>(i), 0, 0, 0, 0});
      double b = rng::gaussian(seed, {static_cast<uint64_t>(i), 1, 0, 0, 0});
      prod[i] = a * b;
      a2[i] = a * a;
      b2[i] = b * b;
    }
    double corr = pairwise_sum(prod) /
                  std::sqrt(pairwise_sum(a2) * pairwise_sum(b2));
    out.rows.push_back({cfg.experiment, 0, big, seed, "stream_corr", corr, 0.0});
    out.results["stream_corr"] = corr;
    if (!(std::abs(corr) < 0.02))
      out.failures.push_back("|corr(dW1, dW2)| >= 0.02");
  }
  return out;
}

// --- writers --------------------------------------------------------------

void write_outputs(const Config& cfg, const Outcome& out, double wall_seconds) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  if (cfg.write_csv) {
    std::ofstream csv(fs::path(cfg.out_dir) / "results.csv", std::ios::binary);
    csv << "experiment,n,M,seed,metric_name,value,stderr\n";
    for (const Row& r : out.rows)
      csv << r.experiment << ',' << r.n << ',' << r.m << ',' << r.seed << ','
          << r.metric << ',' << fmt(r.value) << ',' << fmt(r.stderr_) << '\n';
  }
  if (cfg.write_json) {
    std::ofstream jf(fs::path(cfg.out_dir) / "results.json", std::ios::binary);
    json doc = {{"experiment", cfg.experiment},
                {"results", out.results},
                {"failures", out.failures}};
    jf << doc.dump(2) << '\n';
  }
  json manifest = {
      {"version", kVersion},
      {"wall_seconds", wall_seconds},
      {"config",
       {{"experiment", {{"kind", cfg.experiment}}},
        {"grid", {{"length", cfg.grid_length}, {"points", cfg.grid_n}}},
        {"symbol", {{"name", cfg.symbol_name}, {"params", cfg.symbol_params}}},
        {"initial",
         {{"center", cfg.init_center},
          {"width", cfg.init_width},
          {"momentum", cfg.init_momentum}}},
        {"run",
         {{"horizon", cfg.horizon},
          {"steps", cfg.steps},
          {"ref_substeps", cfg.ref_substeps},
          {"ref_scheme", cfg.ref_scheme},
          {"trajectories", cfg.trajectories},
          {"seed", cfg.seed},
          {"tau", cfg.tau},
          {"workers", cfg.workers}}},
        {"output",
         {{"dir", cfg.out_dir},
          {"formats", std::string(cfg.write_csv ? "csv" : "") +
                          (cfg.write_csv && cfg.write_json ? "," : "") +
                          (cfg.write_json ? "json" : "")},
          {"verbosity", cfg.verbosity}}}}}};
  std::ofstream mf(fs::path(cfg.out_dir) / "manifest.json", std::ios::binary);
  mf << manifest.dump(2) << '\n';
}

}  // namespace

Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Config cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("malformed section header at line " + std::to_string(lineno));
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value at line " + std::to_string(lineno));
    if (section.empty())
      throw ConfigError("key outside any [section] at line " + std::to_string(lineno));
    set_key(&cfg, section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void apply_override(Config* cfg, const std::string& dotted_key,
                    const std::string& value) {
  size_t dot = dotted_key.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override key must look like section.key: " + dotted_key);
  set_key(cfg, dotted_key.substr(0, dot), dotted_key.substr(dot + 1), value);
}

int run_experiment(const Config& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    if (cfg.experiment == "convergence") out = run_convergence(cfg);
    else if (cfg.experiment == "martingale") out = run_martingale(cfg);
    else if (cfg.experiment == "identities") out = run_identities(cfg);
    else if (cfg.experiment == "expansion") out = run_expansion(cfg);
    else if (cfg.experiment == "noise_stats") out = run_noise_stats(cfg);
    else throw ConfigError("unknown experiment kind '" + cfg.experiment + "'");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ExclusionPolicyError& e) {
    std::cerr << "blow-up policy: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_outputs(cfg, out, wall);
  if (cfg.verbosity >= 1) {
    for (const auto& f : out.failures) std::cerr << "FAIL: " << f << "\n";
    std::cout << cfg.experiment << ": " << out.rows.size() << " metrics, "
              << out.failures.size() << " failed assertions, "
              << fmt(wall) << " s\n";
  }
  return out.failures.empty() ? 0 : 1;
}

}  // namespace sito::cli
