#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "safemon/predictor/predictor.hpp"

namespace safemon::experiment {

struct MonitorSettings {
  std::size_t h = 5;
  std::size_t H = 5;
  double delta = 0.1;
  double gamma = 0.005;
  std::size_t t0 = 15;
  /// Fixed tau; when absent it is the tau_quantile of in-distribution |R_t|.
  std::optional<double> tau;
  double tau_quantile = 0.8;
  /// Fixed RCP epsilon; when absent the largest feasible value on the grid.
  std::optional<double> epsilon;
  double epsilon_step = 0.01;
  bool append_before_threshold = true;
};

struct IncrementalSettings {
  std::size_t k_min = 1;
  std::size_t k_max = 6;
  double ratio_threshold = 0.7;
  std::size_t max_reference_points = 0;
};

struct CartpoleSettings {
  std::size_t n_runs = 100;
  std::size_t reference_runs = 500;
  std::size_t tune_iterations = 200;
  std::vector<double> gravity{2.45, 9.8, 39.2, 78.4};
  std::vector<double> pole_length{0.125, 0.5, 2.0};
  std::vector<double> pole_mass{0.1, 1.6, 6.4};
};

struct ExperimentConfig {
  std::string study = "hallway";  // hallway | racetrack | cartpole
  std::uint64_t seed = 1;
  /// Empty means <SAFEMON_OUTPUT_ROOT or ./safemon_out>/<study>.
  std::string output_dir;
  std::size_t id_episodes = 200;
  std::size_t max_steps = 200;
  std::size_t min_length = 25;
  std::array<double, 3> split{0.65, 0.15, 0.20};
  /// Evaluation scenarios; "none" evaluates fresh in-distribution episodes.
  std::vector<std::string> scenarios;
  std::vector<std::string> uq_modes{"PP", "CP", "RCP", "ACP"};
  /// Also run every cell with the incrementally extended predictor set.
  bool il = true;
  std::size_t trials = 5;
  std::size_t eval_episodes = 30;
  std::size_t collection_episodes = 30;
  std::size_t window_stride = 1;
  std::vector<std::size_t> hidden{64, 64};
  predictor::TrainConfig train;
  predictor::TrainConfig fine_tune;
  IncrementalSettings incremental;
  MonitorSettings monitor;
  CartpoleSettings cartpole;

  /// Throws ConfigError naming the offending field path.
  void validate() const;
  [[nodiscard]] std::filesystem::path output_path() const;
};

/// Defaults for one study (scenario list, horizon caps, tau quantile).
ExperimentConfig default_config(const std::string& study);

/// Parses a JSON document over the study defaults; unknown keys are errors.
ExperimentConfig config_from_json(const std::string& text);
/// Canonical JSON (sorted keys); equal configs give equal text.
std::string config_to_json(const ExperimentConfig& config);

/// Applies `path=value` where path is a dotted key such as monitor.delta and
/// value is JSON (bare words are taken as strings). Throws ConfigError.
ExperimentConfig apply_override(const ExperimentConfig& config, const std::string& assignment);

/// 64-bit FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// splitmix64 finaliser.
std::uint64_t splitmix64(std::uint64_t x);
/// Independent stream seed for (base, label, index).
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0);

/// `# config_hash=<hash> seed=<seed>` followed by a newline.
std::string provenance_line(const ExperimentConfig& config);

}  // namespace safemon::experiment
