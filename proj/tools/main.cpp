#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "sito/cli.hpp"
#include "sito/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sito - stochastic Schrodinger-Ito product-formula simulator"};
  app.set_version_flag("--version", std::string(sito::kVersion));

  std::string config_path, experiment, out_dir;
  uint64_t seed = 0;
  int workers = -1;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "config file (sectioned key=value)");
  app.add_option("--experiment", experiment,
                 "experiment kind (convergence, martingale, identities, "
                 "expansion, noise_stats)");
  app.add_option("--seed", seed, "base seed (overrides config)");
  app.add_option("--workers", workers, "worker threads, 0 = auto");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("overrides", overrides, "section.key=value overrides");

  CLI11_PARSE(app, argc, argv);

  try {
    sito::cli::Config cfg;
    if (!config_path.empty()) cfg = sito::cli::parse_config_file(config_path);
    // flags win over file values
    if (app.count("--experiment")) cfg.experiment = experiment;
    if (app.count("--seed")) cfg.seed = seed;
    if (app.count("--workers")) cfg.workers = workers;
    if (app.count("--out")) cfg.out_dir = out_dir;
    for (const std::string& ov : overrides) {
      size_t eq = ov.find('=');
      if (eq == std::string::npos)
        throw sito::cli::ConfigError("override must look like section.key=value: " + ov);
      sito::cli::apply_override(&cfg, ov.substr(0, eq), ov.substr(eq + 1));
    }
    return sito::cli::run_experiment(cfg);
  } catch (const sito::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
