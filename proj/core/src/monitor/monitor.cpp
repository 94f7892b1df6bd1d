#include "safemon/monitor/monitor.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "safemon/error.hpp"
#include "safemon/io.hpp"

namespace safemon::monitor {

using predictor::Matrix;
using predictor::Window;

std::string to_string(UqMode mode) {
  switch (mode) {
    case UqMode::PP: return "PP";
    case UqMode::CP: return "CP";
    case UqMode::RCP: return "RCP";
    case UqMode::ACP: return "ACP";
  }
  return "ACP";
}

UqMode uq_mode_from_string(const std::string& name) {
  if (name == "PP") return UqMode::PP;
  if (name == "CP") return UqMode::CP;
  if (name == "RCP") return UqMode::RCP;
  if (name == "ACP") return UqMode::ACP;
  throw ConfigError("uq_mode", "unknown mode '" + name + "' (expected PP, CP, RCP or ACP)");
}

void MonitorConfig::validate() const {
  if (h == 0) throw ConfigError("monitor.h", "history length must be positive");
  if (H == 0) throw ConfigError("monitor.H", "horizon must be positive");
  if (!(t0 > h + H)) throw ConfigError("monitor.t0", "start time must exceed h + H");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("monitor.delta", "must lie in (0, 1)");
  if (!(gamma > 0.0)) throw ConfigError("monitor.gamma", "must be positive");
  if (!(tau >= 0.0)) throw ConfigError("monitor.tau", "must be nonnegative");
  if (uq_mode == UqMode::RCP && !(epsilon >= 0.0 && epsilon < delta)) {
    throw ConfigError("monitor.epsilon", "robust mode needs 0 <= epsilon < delta");
  }
}

conformal::RegionThreshold frozen_threshold(const MonitorConfig& config,
                                            const conformal::NcsSet& offline_ncs) {
  if (config.uq_mode == UqMode::RCP) {
    return conformal::rcp_threshold(offline_ncs, config.delta, config.epsilon);
  }
  return conformal::icp_threshold(offline_ncs, config.delta);
}

Monitor::Monitor(MonitorConfig config, const incremental::DistributionPredictorSet& dp,
                 SafetySpec spec, std::optional<conformal::NcsSet> offline_ncs)
    : config_(std::move(config)), dp_(&dp), spec_(std::move(spec)) {
  config_.validate();
  const auto& layout = dp.base().layout();
  if (layout.h != config_.h || layout.H != config_.H) {
    throw ConfigError("monitor.h", "history/horizon differ from the predictor layout");
  }
  state_dim_ = layout.state_dim;
  spec_.validate(config_.H, state_dim_);
  if (config_.uq_mode == UqMode::CP || config_.uq_mode == UqMode::RCP) {
    if (!offline_ncs) {
      throw ConfigError("monitor.uq_mode", to_string(config_.uq_mode) + " needs offline calibration scores");
    }
    frozen_ = frozen_threshold(config_, *offline_ncs);
  }
  acp_ = conformal::AcpState::initial(config_.delta, config_.gamma);
}

namespace {

Matrix rows_from(const std::deque<std::vector<double>>& buffer, std::size_t first, std::size_t count,
                 std::size_t dim) {
  Matrix m(count, dim);
  for (std::size_t r = 0; r < count; ++r) {
    const auto& s = buffer[first + r];
    std::copy(s.begin(), s.end(), m.row(r).begin());
  }
  return m;
}

}  // namespace

StepRecord Monitor::step(std::span<const double> state) {
  if (state.size() != state_dim_) {
    throw ShapeError("monitor state has dimension " + std::to_string(state.size()) + ", expected " +
                     std::to_string(state_dim_));
  }
  const std::size_t h = config_.h;
  const std::size_t H = config_.H;
  const std::size_t t = t_;
  buffer_.emplace_back(state.begin(), state.end());
  if (buffer_.size() > h + H) buffer_.pop_front();

  StepRecord rec;
  rec.t = t;
  rec.delta_t = config_.uq_mode == UqMode::ACP ? acp_.delta_t : config_.delta;

  // Forecast the next H states from the last h and score the forecast window.
  if (buffer_.size() >= h) {
    const Matrix history = rows_from(buffer_, buffer_.size() - h, h, state_dim_);
    const std::size_t idx = dp_->select(history);
    const auto& entry = (*dp_)[idx];
    Matrix predicted = entry.predictor.predict(history);
    rec.rho_hat = spec_.robustness(predicted);
    rec.selected_predictor = entry.prototype.label;
    pending_.emplace(t, Pending{*rec.rho_hat, std::move(predicted)});
  }

  // Resolve the forecast issued H steps ago against the states now observed.
  if (t >= H) {
    if (auto it = pending_.find(t - H); it != pending_.end()) {
      const Matrix actual = rows_from(buffer_, buffer_.size() - H, H, state_dim_);
      rec.rho_lagged = spec_.robustness(actual);
      rec.ade = predictor::ade(it->second.predicted, actual, {config_.position_x, config_.position_y});
      if (t > h + H) rec.ncs = it->second.rho_hat - *rec.rho_lagged;
      pending_.erase(it);
    }
  }

  if (rec.ncs && t > config_.t0) {
    const double r = *rec.ncs;
    switch (config_.uq_mode) {
      case UqMode::PP:
        rec.threshold = conformal::RegionThreshold{0.0};
        ncs_.insert(r);
        break;
      case UqMode::CP:
      case UqMode::RCP:
        rec.threshold = *frozen_;
        rec.e_t = frozen_->covers(r) ? 0 : 1;
        ncs_.insert(r);
        break;
      case UqMode::ACP: {
        const auto res = conformal::acp_step(acp_, ncs_, r, config_.append_before_threshold);
        rec.threshold = res.threshold;
        rec.e_t = res.error;
        break;
      }
    }
    rec.alarm = *rec.rho_hat < rec.threshold->value;
    if (std::fabs(r) > config_.tau) {
      Window w;
      w.history = rows_from(buffer_, 0, h, state_dim_);
      w.horizon = rows_from(buffer_, h, H, state_dim_);
      w.episode_id = episode_id;
      w.start_time = static_cast<long>(t + 1 - h - H);
      collected_.push_back(std::move(w));
    }
  } else if (rec.ncs) {
    ncs_.insert(*rec.ncs);
  }

  ++t_;
  return rec;
}

EpisodeRun run_episode(const MonitorConfig& config, const incremental::DistributionPredictorSet& dp,
                       const SafetySpec& spec, const stl::Trace& trace,
                       const std::optional<conformal::NcsSet>& offline_ncs, long episode_id) {
  if (trace.length() < config.t0) {
    throw HorizonError("trace of length " + std::to_string(trace.length()) +
                       " is shorter than the start time " + std::to_string(config.t0));
  }
  Monitor m(config, dp, spec, offline_ncs);
  m.episode_id = episode_id;
  EpisodeRun run;
  run.records.reserve(trace.length());
  for (std::size_t t = 0; t < trace.length(); ++t) run.records.push_back(m.step(trace[t]));
  run.collected = m.collected();
  return run;
}

conformal::NcsSet build_offline_calibration(const std::vector<stl::Trace>& traces,
                                            const predictor::Predictor& predictor,
                                            const SafetySpec& spec, const MonitorConfig& config,
                                            std::uint64_t seed) {
  const std::size_t h = config.h;
  const std::size_t H = config.H;
  spec.validate(H, predictor.layout().state_dim);
  std::mt19937_64 rng(seed);
  std::vector<double> scores;
  for (const auto& trace : traces) {
    if (trace.length() < h + H) throw HorizonError("calibration trace shorter than h + H");
    std::uniform_int_distribution<std::size_t> pick(0, trace.length() - h - H);
    const std::size_t start = pick(rng);
    Matrix history(h, trace.dim());
    Matrix actual(H, trace.dim());
    for (std::size_t r = 0; r < h; ++r) {
      std::copy(trace[start + r].begin(), trace[start + r].end(), history.row(r).begin());
    }
    for (std::size_t r = 0; r < H; ++r) {
      std::copy(trace[start + h + r].begin(), trace[start + h + r].end(), actual.row(r).begin());
    }
    scores.push_back(spec.robustness(predictor.predict(history)) - spec.robustness(actual));
  }
  return conformal::NcsSet(std::move(scores));
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_opt(const std::string& s, std::size_t offset) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("bad number '" + s + "'", offset);
  return v;
}

constexpr const char* kRecordHeader =
    "t,rho_hat,rho_lagged,ncs,c_t,delta_t,e_t,alarm,predictor_label,ade";

}  // namespace

std::string records_csv(const std::vector<StepRecord>& records) {
  std::string out = kRecordHeader;
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.t) + ',' + opt(r.rho_hat) + ',' + opt(r.rho_lagged) + ',' + opt(r.ncs) +
           ',' + (r.threshold ? format_double(r.threshold->value) : std::string()) + ',' +
           format_double(r.delta_t) + ',' + (r.e_t ? std::to_string(*r.e_t) : std::string()) + ',' +
           (r.alarm ? "1" : "0") + ',' + r.selected_predictor + ',' + opt(r.ade) + '\n';
  }
  return out;
}

std::vector<StepRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  // Leading comment lines carry provenance and are skipped.
  std::size_t offset = 0;
  while (std::getline(in, line) && !line.empty() && line.front() == '#') offset += line.size() + 1;
  if (line != kRecordHeader) throw ParseError("unexpected records header", offset);
  offset += line.size() + 1;
  std::vector<StepRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_row(line);
    if (c.size() != 10) throw ParseError("records row needs 10 columns", offset);
    StepRecord r;
    r.t = static_cast<std::size_t>(parse_opt(c[0], offset).value_or(0.0));
    r.rho_hat = parse_opt(c[1], offset);
    r.rho_lagged = parse_opt(c[2], offset);
    r.ncs = parse_opt(c[3], offset);
    if (auto v = parse_opt(c[4], offset)) r.threshold = conformal::RegionThreshold{*v};
    r.delta_t = parse_opt(c[5], offset).value_or(0.0);
    if (auto v = parse_opt(c[6], offset)) r.e_t = static_cast<int>(*v);
    r.alarm = c[7] == "1";
    r.selected_predictor = c[8];
    r.ade = parse_opt(c[9], offset);
    out.push_back(std::move(r));
    offset += line.size() + 1;
  }
  return out;
}

}  // namespace safemon::monitor
