// Command-line front end for the monitoring experiments.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "safemon/error.hpp"
#include "safemon/experiment/config.hpp"
#include "safemon/experiment/pipeline.hpp"
#include "safemon/io.hpp"

namespace {

using namespace safemon;
using namespace safemon::experiment;

struct Options {
  std::string config_path;
  std::string study;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::vector<std::string> overrides;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) {
    c = config_from_json(read_file(o.config_path));
    if (!o.study.empty() && o.study != c.study) {
      throw ConfigError("study", "--study " + o.study + " disagrees with the config file (" + c.study + ")");
    }
  } else {
    c = default_config(o.study.empty() ? "hallway" : o.study);
  }
  if (o.seed) c.seed = *o.seed;
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  for (const auto& s : o.overrides) c = apply_override(c, s);
  c.validate();
  return c;
}

void announce(const ExperimentConfig& c) {
  std::cerr << "study=" << c.study << " seed=" << c.seed << " config_hash=" << config_hash(c)
            << " output=" << c.output_path().string() << '\n';
}

void cmd_generate(const ExperimentConfig& c) {
  const auto r = generate(c, c.output_path());
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "simulated " << r.simulated << " episodes, filtered " << r.filtered << " shorter than "
            << c.min_length << " steps\n"
            << "split train=" << r.train << " validation=" << r.validation << " test=" << r.test << '\n';
}

void cmd_train(const ExperimentConfig& c) {
  const auto data = load_dataset(c, c.output_path());
  const auto m = train(c, data, c.output_path());
  std::cout << "tau=" << m.tau << " epsilon=" << (m.epsilon ? std::to_string(*m.epsilon) : "none")
            << " offline_ncs=" << m.offline.size() << '\n'
            << "validation_mae=" << m.validation_mae << " test_mae=" << m.test_mae << '\n';
}

void cmd_monitor(const ExperimentConfig& c) {
  const auto data = load_dataset(c, c.output_path());
  const auto model = load_model(c, c.output_path());
  const auto r = run_monitoring(c, data, model, c.output_path());
  std::cout << "cells=" << r.cells << " episodes=" << r.episodes << " skipped_short=" << r.skipped_short
            << '\n';
}

void cmd_report(const ExperimentConfig& c) {
  report(c, c.output_path());
  std::cout << (c.output_path() / "report" / "summary.json").string() << '\n';
}

void cmd_sweep(const ExperimentConfig& c) {
  sweep_cartpole(c, c.output_path());
  std::cout << (c.output_path() / "sweep" / "cartpole_sweep.csv").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive runtime monitoring with adaptive conformal thresholds"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--study", o.study, "Study defaults when no config file is given")
      ->check(CLI::IsMember({"hallway", "racetrack", "cartpole"}));
  app.add_option("--seed", o.seed, "Base seed");
  app.add_option("--output-dir", o.output_dir, "Output directory (default $SAFEMON_OUTPUT_ROOT/<study>)");
  app.add_option("--set", o.overrides, "Override a config field, e.g. --set monitor.delta=0.05");

  using Command = void (*)(const ExperimentConfig&);
  const std::pair<const char*, Command> commands[] = {
      {"generate", cmd_generate}, {"train", cmd_train},          {"monitor", cmd_monitor},
      {"report", cmd_report},     {"sweep-cartpole", cmd_sweep},
  };
  const char* help[] = {
      "Simulate in-distribution episodes and write the split manifest",
      "Train the base predictor and calibrate offline thresholds",
      "Run every scenario, trial, mode and IL cell",
      "Aggregate monitoring runs into summary JSON and CSV tables",
      "Sweep cartpole physics parameters",
  };
  Command chosen = nullptr;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    app.add_subcommand(commands[i].first, help[i])->callback([&chosen, f = commands[i].second] { chosen = f; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto config = resolve(o);
    announce(config);
    chosen(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
