#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "safemon/conformal/conformal.hpp"
#include "safemon/incremental/dp_set.hpp"
#include "safemon/monitor/safety_spec.hpp"
#include "safemon/predictor/matrix.hpp"
#include "safemon/stl/trace.hpp"

namespace safemon::monitor {

/// PP: point prediction, C_t = 0. CP/RCP: threshold frozen from the offline
/// calibration set. ACP: adaptive threshold over the online scores.
enum class UqMode { PP, CP, RCP, ACP };

std::string to_string(UqMode mode);
/// Throws ConfigError on unknown names.
UqMode uq_mode_from_string(const std::string& name);

struct MonitorConfig {
  std::size_t h = 5;
  std::size_t H = 5;
  double delta = 0.1;
  double gamma = 0.005;
  double tau = 0.0;
  std::size_t t0 = 15;
  UqMode uq_mode = UqMode::ACP;
  double epsilon = 0.0;
  /// Append R_t before forming C_t (listed order); false forms C_t first.
  bool append_before_threshold = true;
  /// Ego position columns used for the per-step ADE.
  std::size_t position_x = 0;
  std::size_t position_y = 1;

  /// Requires t0 > h + H, delta in (0, 1), gamma > 0, tau >= 0 and, for RCP,
  /// 0 <= epsilon < delta. Throws ConfigError naming the field.
  void validate() const;
};

struct StepRecord {
  std::size_t t = 0;
  /// Robustness of the predicted window [t+1, t+H]; set once h states are seen.
  std::optional<double> rho_hat;
  /// Actual robustness of the window predicted at t - H.
  std::optional<double> rho_lagged;
  /// R_t = rho_hat_{t-H} - rho_{t-H}; set iff t > h + H.
  std::optional<double> ncs;
  /// C_t; set iff t > t0.
  std::optional<conformal::RegionThreshold> threshold;
  double delta_t = 0.0;
  /// [R_t > C_t] for the conformal modes; set iff t > t0.
  std::optional<int> e_t;
  bool alarm = false;
  std::string selected_predictor;
  /// Average displacement of the prediction issued at t - H, on the position dims.
  std::optional<double> ade;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Online monitor for one episode. Holds only the states it has been given.
class Monitor {
 public:
  /// CP and RCP need `offline_ncs`; its threshold is computed once here.
  Monitor(MonitorConfig config, const incremental::DistributionPredictorSet& dp, SafetySpec spec,
          std::optional<conformal::NcsSet> offline_ncs = std::nullopt);

  /// Consumes s_t for the next t. Throws ShapeError on a dimension mismatch.
  StepRecord step(std::span<const double> state);

  [[nodiscard]] std::size_t time() const { return t_; }
  [[nodiscard]] const std::vector<predictor::Window>& collected() const { return collected_; }
  [[nodiscard]] const conformal::NcsSet& ncs() const { return ncs_; }
  [[nodiscard]] const conformal::AcpState& acp() const { return acp_; }
  /// Episode id stamped on collected windows.
  long episode_id = -1;

 private:
  struct Pending {
    double rho_hat;
    predictor::Matrix predicted;
  };

  MonitorConfig config_;
  const incremental::DistributionPredictorSet* dp_;
  SafetySpec spec_;
  std::size_t state_dim_;
  std::optional<conformal::RegionThreshold> frozen_;
  conformal::NcsSet ncs_;
  conformal::AcpState acp_;
  std::deque<std::vector<double>> buffer_;  // last h + H states
  std::map<std::size_t, Pending> pending_;
  std::vector<predictor::Window> collected_;
  std::size_t t_ = 0;
};

struct EpisodeRun {
  std::vector<StepRecord> records;
  std::vector<predictor::Window> collected;
};

/// Feeds every state of `trace` through a fresh Monitor. Traces shorter than
/// t0 are rejected with HorizonError.
EpisodeRun run_episode(const MonitorConfig& config, const incremental::DistributionPredictorSet& dp,
                       const SafetySpec& spec, const stl::Trace& trace,
                       const std::optional<conformal::NcsSet>& offline_ncs = std::nullopt,
                       long episode_id = -1);

/// One uniformly drawn history/horizon pair per trace, scored as predicted
/// minus actual robustness. Throws HorizonError for traces shorter than h + H.
conformal::NcsSet build_offline_calibration(const std::vector<stl::Trace>& traces,
                                            const predictor::Predictor& predictor,
                                            const SafetySpec& spec, const MonitorConfig& config,
                                            std::uint64_t seed);

/// Threshold CP or RCP would freeze for this configuration.
conformal::RegionThreshold frozen_threshold(const MonitorConfig& config,
                                            const conformal::NcsSet& offline_ncs);

/// Columns t,rho_hat,rho_lagged,ncs,c_t,delta_t,e_t,alarm,predictor_label,ade;
/// absent values are empty, infinite thresholds print as inf / -inf.
std::string records_csv(const std::vector<StepRecord>& records);

/// Inverse of records_csv. Throws ParseError with the byte offset of the bad row.
std::vector<StepRecord> parse_records_csv(const std::string& text);

}  // namespace safemon::monitor
