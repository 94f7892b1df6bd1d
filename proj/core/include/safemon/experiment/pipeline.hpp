#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "safemon/conformal/conformal.hpp"
#include "safemon/envs/scenario.hpp"
#include "safemon/experiment/config.hpp"
#include "safemon/incremental/dp_set.hpp"
#include "safemon/monitor/monitor.hpp"
#include "safemon/monitor/safety_spec.hpp"
#include "safemon/predictor/predictor.hpp"

namespace safemon::experiment {

/// Network input/output layout used for the configured study.
predictor::PredictorLayout study_layout(const ExperimentConfig& config);
/// Collision property for the vehicle studies, the cartpole envelope formula
/// over H steps otherwise.
monitor::SafetySpec study_spec(const ExperimentConfig& config);
monitor::MonitorConfig monitor_config(const ExperimentConfig& config, monitor::UqMode mode,
                                      double tau, double epsilon);

/// One rollout of the study under `scenario`. Hallway runs take their start
/// from the fixed start grid at `start_index` (modulo its size).
envs::Episode simulate(const ExperimentConfig& config, const envs::OodScenario& scenario,
                       std::uint64_t seed, std::size_t start_index);

/// Every (h, H) window of `trace` whose start is a multiple of `stride`.
std::vector<predictor::Window> sliding_windows(const stl::Trace& trace, std::size_t h, std::size_t H,
                                               std::size_t stride, long episode_id);
/// A window is a crash window when the property fails on its true horizon.
std::vector<bool> crash_labels(const std::vector<predictor::Window>& windows,
                               const monitor::SafetySpec& spec);

struct Dataset {
  std::vector<envs::Episode> train, validation, test;
};

struct GenerateResult {
  std::size_t simulated = 0;
  /// Episodes dropped for being shorter than min_length.
  std::size_t filtered = 0;
  std::size_t train = 0, validation = 0, test = 0;
  std::vector<std::string> warnings;
};

/// Simulates the in-distribution episodes, drops short ones and writes
/// data/episodes plus data/manifest.json under `out`.
GenerateResult generate(const ExperimentConfig& config, const std::filesystem::path& out);
/// Reads the split written by generate; throws ConfigError on a hash mismatch.
Dataset load_dataset(const ExperimentConfig& config, const std::filesystem::path& out);

struct TrainedModel {
  incremental::DistributionPredictorSet dp;
  conformal::NcsSet offline;
  double tau = 0.0;
  /// RCP epsilon; absent when no value on the grid fits the calibration size.
  std::optional<double> epsilon;
  double validation_mae = 0.0;
  double test_mae = 0.0;
};

/// Base predictor on the train split, offline scores and tau from the
/// validation split. Writes model/ under `out`.
TrainedModel train(const ExperimentConfig& config, const Dataset& data,
                   const std::filesystem::path& out);
TrainedModel load_model(const ExperimentConfig& config, const std::filesystem::path& out);

struct MonitorResult {
  std::size_t cells = 0;
  std::size_t episodes = 0;
  /// Evaluation episodes shorter than t0, which the monitor cannot run.
  std::size_t skipped_short = 0;
};

/// Runs every (scenario, trial, mode, il) cell and writes runs/ under `out`.
MonitorResult run_monitoring(const ExperimentConfig& config, const Dataset& data,
                             const TrainedModel& model, const std::filesystem::path& out);

/// Aggregates runs/ into report/. Throws EmptyInputError when there is nothing
/// to report and ConfigError when a file was written under another config.
void report(const ExperimentConfig& config, const std::filesystem::path& out);

/// Writes sweep/cartpole_sweep.csv under `out`.
void sweep_cartpole(const ExperimentConfig& config, const std::filesystem::path& out);

/// Cell file name such as "ACP" or "ACP_il".
std::string cell_name(monitor::UqMode mode, bool il);

/// One monitored episode read back from a cell file.
struct CellEpisode {
  long id = -1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> violation_time;
  std::vector<monitor::StepRecord> records;
};

/// Parses a cell file; `hash` must match its provenance line.
std::vector<CellEpisode> read_cell(const std::filesystem::path& path, const std::string& hash);

}  // namespace safemon::experiment
