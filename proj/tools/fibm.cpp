#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "fibm/bench.hpp"

namespace {

/// Options given on the command line, applied over the config file.
struct Overrides {
  std::map<std::string, std::string> values;
  bool record_time = false;
  bool corrupt_index = false;
};

void add_options(CLI::App& app, Overrides& o, std::string& config) {
  app.add_option("--config", config, "key = value config file");
  const std::pair<const char*, const char*> flags[] = {
      {"--graph", "graph"},
      {"--communities", "communities"},
      {"--out", "out"},
      {"--seed", "seed"},
      {"--beta", "beta"},
      {"--beta-grid", "beta_grid"},
      {"--k", "k"},
      {"--mu", "mu"},
      {"--alpha", "alpha"},
      {"--selector", "selector"},
      {"--objective", "objective"},
      {"--mc-runs", "mc.runs"},
      {"--vrr-samples", "vrr.samples_per_root"},
      {"--repetitions", "repetitions"},
      {"--negative-seeds", "negative_seeds"},
      {"--directed", "directed"},
      {"--weights", "weights"},
      {"--batch", "optimize.batch"},
      {"--kappa-budget", "optimize.kappa_budget"},
  };
  for (const auto& [flag, key] : flags) {
    const std::string k = key;
    app.add_option_function<std::string>(flag, [&o, k](const std::string& v) { o.values[k] = v; },
                                         "sets " + k);
  }
  app.add_flag("--record-time", o.record_time, "record wall-clock time in reports");
  app.add_flag("--corrupt-index", o.corrupt_index, "corrupt the sampled index (validate test hook)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair influence blocking benchmark"};
  app.set_version_flag("--version", std::string(fibm::bench::kVersion));
  app.require_subcommand(1, 1);
  const std::pair<const char*, const char*> commands[] = {
      {"sample", "sample VRR indexes and write them to the output directory"},
      {"select", "select positive seeds for one beta"},
      {"sweep", "sweep beta and write the Pareto front"},
      {"validate", "cross-check the estimators against independent oracles"},
      {"report", "aggregate run reports into CSV tables"},
  };
  Overrides overrides;
  std::string config;
  for (const auto& [name, help] : commands) add_options(*app.add_subcommand(name, help), overrides, config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fibm::bench::kUsage;
  }

  fibm::bench::RunConfig cfg;
  try {
    if (!config.empty()) cfg = fibm::bench::load_config(config);
    for (const auto& [key, value] : overrides.values) fibm::bench::set_option(cfg, key, value);
  } catch (const fibm::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return fibm::bench::kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fibm::bench::kUsage;
  }
  if (overrides.record_time) cfg.record_time = true;
  cfg.corrupt_index = overrides.corrupt_index;
  return fibm::bench::run_command(app.get_subcommands().front()->get_name(), cfg, std::cerr);
}
