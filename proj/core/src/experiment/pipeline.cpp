#include "safemon/experiment/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "safemon/conformal/diagnostics.hpp"
#include "safemon/envs/cartpole.hpp"
#include "safemon/envs/episode_io.hpp"
#include "safemon/envs/hallway.hpp"
#include "safemon/envs/racetrack.hpp"
#include "safemon/error.hpp"
#include "safemon/io.hpp"
#include "safemon/metrics/metrics.hpp"
#include "safemon/stl/parser.hpp"

namespace safemon::experiment {

namespace fs = std::filesystem;
using json = nlohmann::json;
using monitor::UqMode;
using predictor::Window;

namespace {

constexpr std::size_t kRacetrackSlots = 5;

envs::LinearController cartpole_controller(const ExperimentConfig& config) {
  // Tuning is deterministic in (seed, iterations); keep the last result.
  static std::optional<std::pair<std::pair<std::uint64_t, std::size_t>, envs::LinearController>> cache;
  const auto key = std::make_pair(config.seed, config.cartpole.tune_iterations);
  if (!cache || cache->first != key) {
    cache.emplace(key, envs::tune_cartpole_controller(derive_seed(config.seed, "controller"),
                                                      config.cartpole.tune_iterations));
  }
  return cache->second;
}

void check_hash(const json& j, const std::string& hash, const fs::path& path) {
  if (!j.contains("config_hash") || j["config_hash"] != hash) {
    throw ConfigError("config_hash", path.string() + " was written under a different configuration");
  }
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<stl::Trace> traces_of(const std::vector<envs::Episode>& episodes) {
  std::vector<stl::Trace> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(e.trace);
  return out;
}

std::vector<Window> windows_of(const ExperimentConfig& config, const std::vector<envs::Episode>& episodes) {
  std::vector<Window> out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    auto w = sliding_windows(episodes[i].trace, config.monitor.h, config.monitor.H, config.window_stride,
                             static_cast<long>(i));
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

std::string opt_text(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "none"; }

/// Value of `key=` inside a "# a=1 b=2" line.
std::string field_of(const std::string& line, const std::string& key) {
  const auto pos = line.find(" " + key + "=");
  if (pos == std::string::npos) throw ParseError("missing '" + key + "' in '" + line + "'", 0);
  const auto begin = pos + key.size() + 2;
  const auto end = line.find(' ', begin);
  return line.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
}

std::string hash_of_provenance(const std::string& first_line) {
  if (first_line.rfind("# config_hash=", 0) != 0) return {};
  return field_of(first_line.substr(1), "config_hash");
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<UqMode> modes_of(const ExperimentConfig& config) {
  std::vector<UqMode> out;
  for (const auto& m : config.uq_modes) out.push_back(monitor::uq_mode_from_string(m));
  return out;
}

}  // namespace

predictor::PredictorLayout study_layout(const ExperimentConfig& config) {
  predictor::PredictorLayout l;
  l.h = config.monitor.h;
  l.H = config.monitor.H;
  l.learned_dims = {0, 1, 2, 3};
  l.constant_velocity_baseline = true;
  if (config.study == "racetrack") {
    l.state_dim = 4 + 2 * kRacetrackSlots;
    // Positions relative to the last observed x keep the features stationary
    // along the track.
    l.frame_dims = {0};
    for (std::size_t i = 0; i < kRacetrackSlots; ++i) l.agent_x_dims.push_back(4 + 2 * i);
    l.context_agents = 1;
  } else {
    l.state_dim = 4;
  }
  l.validate();
  return l;
}

monitor::SafetySpec study_spec(const ExperimentConfig& config) {
  if (config.study == "hallway") {
    const auto world = envs::HallwayWorld::standard();
    return monitor::SafetySpec::wall_collision(world.walls, world.clearance);
  }
  if (config.study == "racetrack") {
    const envs::RacetrackWorld world;
    std::vector<std::pair<std::size_t, std::size_t>> agents;
    for (std::size_t i = 0; i < kRacetrackSlots; ++i) agents.emplace_back(4 + 2 * i, 5 + 2 * i);
    return monitor::SafetySpec::agent_collision(std::move(agents), world.clearance);
  }
  envs::CartpoleParams p;
  p.episode_cap = config.monitor.H;
  return monitor::SafetySpec::from_formula(stl::parse_formula(envs::cartpole_formula_text(p), 4));
}

monitor::MonitorConfig monitor_config(const ExperimentConfig& config, UqMode mode, double tau,
                                      double epsilon) {
  monitor::MonitorConfig m;
  m.h = config.monitor.h;
  m.H = config.monitor.H;
  m.delta = config.monitor.delta;
  m.gamma = config.monitor.gamma;
  m.t0 = config.monitor.t0;
  m.tau = tau;
  m.uq_mode = mode;
  m.epsilon = epsilon;
  m.append_before_threshold = config.monitor.append_before_threshold;
  return m;
}

envs::Episode simulate(const ExperimentConfig& config, const envs::OodScenario& scenario,
                       std::uint64_t seed, std::size_t start_index) {
  if (config.study == "hallway") {
    const auto world = envs::HallwayWorld::standard();
    // 180 distinct starts: 4 straights x 5 positions x 3 lateral x 3 heading offsets.
    const auto starts = envs::hallway_start_grid(world, 180);
    return envs::simulate_hallway(world, envs::FollowGapController{}, scenario, seed, config.max_steps,
                                  starts[start_index % starts.size()]);
  }
  if (config.study == "racetrack") return envs::simulate_racetrack(scenario, seed, config.max_steps);
  return envs::simulate_cartpole(scenario, cartpole_controller(config), seed);
}

std::vector<Window> sliding_windows(const stl::Trace& trace, std::size_t h, std::size_t H,
                                    std::size_t stride, long episode_id) {
  if (stride == 0) throw ParameterError("window stride must be positive");
  std::vector<Window> out;
  const std::size_t n = trace.length();
  const std::size_t d = trace.dim();
  for (std::size_t s = 0; s + h + H <= n; s += stride) {
    Window w;
    w.history = predictor::Matrix(h, d);
    w.horizon = predictor::Matrix(H, d);
    for (std::size_t r = 0; r < h; ++r) std::ranges::copy(trace[s + r], w.history.row(r).begin());
    for (std::size_t r = 0; r < H; ++r) std::ranges::copy(trace[s + h + r], w.horizon.row(r).begin());
    w.episode_id = episode_id;
    w.start_time = static_cast<long>(s);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<bool> crash_labels(const std::vector<Window>& windows, const monitor::SafetySpec& spec) {
  std::vector<bool> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(spec.robustness(w.horizon) <= 0.0);
  return out;
}

GenerateResult generate(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  GenerateResult r;
  const fs::path data = out / "data";
  fs::remove_all(data);
  std::vector<std::string> kept;
  json filtered = json::array();
  for (std::size_t i = 0; i < config.id_episodes; ++i) {
    const std::uint64_t seed = derive_seed(config.seed, "id", i);
    auto ep = simulate(config, envs::OodScenario::none(), seed, i);
    ++r.simulated;
    if (ep.trace.length() < config.min_length) {
      ++r.filtered;
      filtered.push_back({{"index", i}, {"seed", seed}, {"length", ep.trace.length()}});
      continue;
    }
    char name[32];
    std::snprintf(name, sizeof name, "id_%05zu.csv", i);
    envs::write_episode(ep, data / "episodes" / name);
    kept.emplace_back(name);
  }
  if (config.id_episodes == 0) r.warnings.push_back("id_episodes is 0; the manifest is empty");

  std::mt19937_64 rng(derive_seed(config.seed, "split"));
  std::shuffle(kept.begin(), kept.end(), rng);
  const auto n = kept.size();
  r.train = static_cast<std::size_t>(std::floor(config.split[0] * static_cast<double>(n)));
  r.validation = static_cast<std::size_t>(std::floor(config.split[1] * static_cast<double>(n)));
  r.test = n - r.train - r.validation;
  auto part = [&](std::size_t begin, std::size_t count) {
    std::vector<std::string> v(kept.begin() + static_cast<long>(begin),
                               kept.begin() + static_cast<long>(begin + count));
    std::sort(v.begin(), v.end());
    return v;
  };
  json manifest;
  manifest["config_hash"] = config_hash(config);
  manifest["seed"] = config.seed;
  manifest["study"] = config.study;
  manifest["simulated"] = r.simulated;
  manifest["filtered"] = filtered;
  manifest["min_length"] = config.min_length;
  manifest["splits"] = {{"train", part(0, r.train)},
                        {"validation", part(r.train, r.validation)},
                        {"test", part(r.train + r.validation, r.test)}};
  write_file_atomic(data / "manifest.json", dump(manifest));
  return r;
}

Dataset load_dataset(const ExperimentConfig& config, const fs::path& out) {
  const fs::path path = out / "data" / "manifest.json";
  const json manifest = read_json(path);
  check_hash(manifest, config_hash(config), path);
  Dataset d;
  auto load = [&](const char* split, std::vector<envs::Episode>& dst) {
    for (const auto& name : manifest.at("splits").at(split)) {
      dst.push_back(envs::read_episode(out / "data" / "episodes" / name.get<std::string>()));
    }
  };
  load("train", d.train);
  load("validation", d.validation);
  load("test", d.test);
  return d;
}

TrainedModel train(const ExperimentConfig& config, const Dataset& data, const fs::path& out) {
  config.validate();
  const auto layout = study_layout(config);
  const auto spec = study_spec(config);
  const auto windows = windows_of(config, data.train);
  if (windows.empty()) throw EmptyInputError("the train split yields no windows");
  if (data.validation.empty()) throw EmptyInputError("the validation split is empty");

  predictor::TrainConfig tc = config.train;
  tc.seed = derive_seed(config.seed, "train");
  auto base = predictor::train(windows, crash_labels(windows, spec), layout, config.hidden, tc);

  TrainedModel m;
  m.dp = incremental::DistributionPredictorSet(base, windows);
  const auto acp = monitor_config(config, UqMode::ACP, 0.0, 0.0);
  m.offline = monitor::build_offline_calibration(traces_of(data.validation), base, spec, acp,
                                                 derive_seed(config.seed, "calibration"));

  if (config.monitor.tau) {
    m.tau = *config.monitor.tau;
  } else {
    // Nearest-rank quantile of in-distribution |R_t| over the validation runs.
    std::vector<double> abs_ncs;
    const auto pp = monitor_config(config, UqMode::PP, 0.0, 0.0);
    for (const auto& ep : data.validation) {
      if (ep.trace.length() < pp.t0) continue;
      for (const auto& rec : monitor::run_episode(pp, m.dp, spec, ep.trace).records) {
        if (rec.ncs) abs_ncs.push_back(std::fabs(*rec.ncs));
      }
    }
    if (abs_ncs.empty()) throw EmptyInputError("validation runs produced no scores for tau");
    std::sort(abs_ncs.begin(), abs_ncs.end());
    const long k = conformal::quantile_index(config.monitor.tau_quantile * static_cast<double>(abs_ncs.size()));
    m.tau = abs_ncs[static_cast<std::size_t>(std::clamp<long>(k, 1, static_cast<long>(abs_ncs.size())) - 1)];
  }

  if (config.monitor.epsilon) {
    m.epsilon = *config.monitor.epsilon;
  } else {
    const double e = conformal::max_feasible_epsilon(m.offline.size(), config.monitor.delta,
                                                     config.monitor.epsilon_step);
    if (e >= 0.0) m.epsilon = e;
  }

  const auto val_windows = windows_of(config, data.validation);
  const auto test_windows = windows_of(config, data.test);
  if (!val_windows.empty()) m.validation_mae = predictor::mean_absolute_error(base, val_windows);
  if (!test_windows.empty()) m.test_mae = predictor::mean_absolute_error(base, test_windows);

  const fs::path dir = out / "model";
  fs::remove_all(dir);
  m.dp.save(dir / "dp");
  json j;
  j["config_hash"] = config_hash(config);
  j["seed"] = config.seed;
  j["train_seed"] = tc.seed;
  j["train_windows"] = windows.size();
  j["offline_ncs"] = m.offline.sorted();
  j["tau"] = m.tau;
  j["epsilon"] = m.epsilon ? json(*m.epsilon) : json(nullptr);
  j["validation_mae"] = m.validation_mae;
  j["test_mae"] = m.test_mae;
  j["loss_curve"] = base.report().loss_curve;
  write_file_atomic(dir / "calibration.json", dump(j));
  return m;
}

TrainedModel load_model(const ExperimentConfig& config, const fs::path& out) {
  const fs::path path = out / "model" / "calibration.json";
  const json j = read_json(path);
  check_hash(j, config_hash(config), path);
  TrainedModel m;
  m.dp = incremental::DistributionPredictorSet::load(out / "model" / "dp");
  m.offline = conformal::NcsSet(j.at("offline_ncs").get<std::vector<double>>());
  m.tau = j.at("tau").get<double>();
  if (!j.at("epsilon").is_null()) m.epsilon = j.at("epsilon").get<double>();
  m.validation_mae = j.at("validation_mae").get<double>();
  m.test_mae = j.at("test_mae").get<double>();
  return m;
}

std::string cell_name(UqMode mode, bool il) { return monitor::to_string(mode) + (il ? "_il" : ""); }

namespace {

struct EvalEpisode {
  long id;
  std::uint64_t seed;
  envs::Episode episode;
};

std::string windows_csv(const std::string& provenance, const std::vector<Window>& W,
                        const std::vector<bool>& crash) {
  std::string s = provenance + "episode,start_time,crash,values\n";
  for (std::size_t i = 0; i < W.size(); ++i) {
    s += std::to_string(W[i].episode_id) + ',' + std::to_string(W[i].start_time) + ',' +
         (crash[i] ? "1" : "0");
    for (double v : W[i].history.data) s += ',' + format_double(v);
    for (double v : W[i].horizon.data) s += ',' + format_double(v);
    s += '\n';
  }
  return s;
}

}  // namespace

MonitorResult run_monitoring(const ExperimentConfig& config, const Dataset& data,
                             const TrainedModel& model, const fs::path& out) {
  config.validate();
  const auto spec = study_spec(config);
  const auto modes = modes_of(config);
  const std::string provenance = provenance_line(config);
  const std::string hash = config_hash(config);
  if (std::ranges::find(modes, UqMode::RCP) != modes.end() && !model.epsilon) {
    throw ConfigError("monitor.epsilon", "no epsilon on the grid fits a calibration set of size " +
                                             std::to_string(model.offline.size()));
  }
  const double epsilon = model.epsilon.value_or(0.0);
  const std::size_t t0 = config.monitor.t0;
  const fs::path runs = out / "runs";
  fs::remove_all(runs);

  std::vector<Window> reference;
  if (config.il) reference = windows_of(config, data.train);

  MonitorResult result;
  for (const auto& name : config.scenarios) {
    const auto scenario = envs::OodScenario::from_name(name);
    for (std::size_t k = 0; k < config.trials; ++k) {
      const std::string stream = name + "/" + std::to_string(k);
      const fs::path dir = runs / name / ("trial_" + std::to_string(k));

      std::vector<EvalEpisode> eval;
      std::string listing = provenance + "episode,seed,length,violation_time,monitored\n";
      for (std::size_t i = 0; i < config.eval_episodes; ++i) {
        const std::uint64_t seed = derive_seed(config.seed, "eval/" + stream, i);
        auto ep = simulate(config, scenario, seed, static_cast<std::size_t>(seed));
        const long id = static_cast<long>(k * config.eval_episodes + i);
        const bool monitored = ep.trace.length() >= t0;
        listing += std::to_string(id) + ',' + std::to_string(seed) + ',' + std::to_string(ep.trace.length()) +
                   ',' + opt_text(ep.violation_time) + ',' + (monitored ? "1" : "0") + '\n';
        if (!monitored) {
          ++result.skipped_short;
          continue;
        }
        eval.push_back({id, seed, std::move(ep)});
      }
      write_file_atomic(dir / "episodes.csv", listing);

      std::vector<std::pair<bool, incremental::DistributionPredictorSet>> arms;
      arms.emplace_back(false, model.dp);
      if (config.il) {
        // Collection pass on fresh episodes of the same scenario.
        std::vector<Window> W;
        const auto collect_cfg = monitor_config(config, UqMode::ACP, model.tau, epsilon);
        for (std::size_t i = 0; i < config.collection_episodes; ++i) {
          const std::uint64_t seed = derive_seed(config.seed, "collect/" + stream, i);
          const auto ep = simulate(config, scenario, seed, static_cast<std::size_t>(seed));
          if (ep.trace.length() < t0) continue;
          auto run = monitor::run_episode(collect_cfg, model.dp, spec, ep.trace, std::nullopt,
                                          static_cast<long>(i));
          W.insert(W.end(), std::make_move_iterator(run.collected.begin()),
                   std::make_move_iterator(run.collected.end()));
        }
        const auto W_crash = crash_labels(W, spec);
        json il;
        il["config_hash"] = hash;
        il["W"] = W.size();
        incremental::DistributionPredictorSet extended = model.dp;
        if (!W.empty()) {
          incremental::IncrementalConfig ic;
          ic.k_min = config.incremental.k_min;
          ic.k_max = config.incremental.k_max;
          ic.ratio_threshold = config.incremental.ratio_threshold;
          ic.max_reference_points = config.incremental.max_reference_points;
          ic.seed = derive_seed(config.seed, "il/" + stream);
          ic.fine_tune = config.fine_tune;
          ic.fine_tune.seed = derive_seed(config.seed, "fine_tune/" + stream);
          auto update = incremental::incremental_update(model.dp, W, W_crash, reference,
                                                        model.dp.base(), ic);
          il["k"] = update.k;
          il["admitted"] = update.admitted;
          il["no_cluster_admitted"] = update.no_cluster_admitted;
          extended = std::move(update.dp);
        } else {
          il["no_cluster_admitted"] = true;
        }
        il["dp_size"] = extended.size();
        write_file_atomic(dir / "il.json", dump(il));
        write_file_atomic(dir / "W.csv", windows_csv(provenance, W, W_crash));
        arms.emplace_back(true, std::move(extended));
      }

      for (const auto& [il, dp] : arms) {
        for (UqMode mode : modes) {
          const auto mc = monitor_config(config, mode, model.tau, epsilon);
          std::string text = provenance;
          for (const auto& e : eval) {
            const auto run = monitor::run_episode(mc, dp, spec, e.episode.trace, model.offline, e.id);
            text += "# episode=" + std::to_string(e.id) + " seed=" + std::to_string(e.seed) +
                    " violation_time=" + opt_text(e.episode.violation_time) + '\n';
            text += monitor::records_csv(run.records);
          }
          write_file_atomic(dir / (cell_name(mode, il) + ".csv"), text);
          ++result.cells;
        }
      }
      result.episodes += eval.size();
    }
  }
  return result;
}

std::vector<CellEpisode> read_cell(const fs::path& path, const std::string& hash) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || hash_of_provenance(line) != hash) {
    throw ConfigError("config_hash", path.string() + " was written under a different configuration");
  }
  std::vector<CellEpisode> out;
  std::string body;
  auto flush = [&] {
    if (!out.empty()) out.back().records = monitor::parse_records_csv(body);
    body.clear();
  };
  while (std::getline(in, line)) {
    if (line.rfind("# episode=", 0) == 0) {
      flush();
      CellEpisode e;
      const std::string fields = line.substr(1);
      e.id = std::stol(field_of(fields, "episode"));
      e.seed = std::stoull(field_of(fields, "seed"));
      const auto v = field_of(fields, "violation_time");
      if (v != "none") e.violation_time = std::stoul(v);
      out.push_back(std::move(e));
    } else {
      if (out.empty()) throw ParseError(path.string() + ": records before the first episode header", 0);
      body += line + '\n';
    }
  }
  flush();
  return out;
}

namespace {

struct ScenarioCounts {
  std::size_t episodes = 0, violating = 0, skipped_short = 0;
};

ScenarioCounts read_listing(const fs::path& path, const std::string& hash) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || hash_of_provenance(line) != hash) {
    throw ConfigError("config_hash", path.string() + " was written under a different configuration");
  }
  std::getline(in, line);  // header
  ScenarioCounts c;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, ',');) cols.push_back(col);
    if (cols.size() != 5) throw ParseError(path.string() + ": bad row '" + line + "'", 0);
    ++c.episodes;
    if (cols[3] != "none") ++c.violating;
    if (cols[4] == "0") ++c.skipped_short;
  }
  return c;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_opt(const std::optional<metrics::MeanStd>& v, bool with_std = true) {
  if (!v) return with_std ? "," : "";
  return format_double(v->mean) + (with_std ? "," + format_double(v->std) : "");
}

bool within(const std::vector<metrics::EnvelopePoint>& series) {
  return std::ranges::all_of(series, [](const metrics::EnvelopePoint& p) {
    return p.empirical >= p.lower && p.empirical <= p.upper;
  });
}

std::string ncs_kde_csv(const std::string& provenance, const std::vector<double>& offline,
                        const std::vector<double>& online) {
  std::string s = provenance + "x,offline,online\n";
  if (offline.empty() || online.empty()) return s;
  const auto [a0, a1] = std::ranges::minmax(offline);
  const auto [b0, b1] = std::ranges::minmax(online);
  const double lo = std::min(a0, b0);
  const double hi = std::max(a1, b1);
  std::vector<double> grid(200);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid.size() - 1);
  }
  // Silverman-style bandwidth per sample, floored for degenerate samples.
  auto bw = [](const std::vector<double>& v) {
    return std::max(1e-6, 1.06 * std_of(v) * std::pow(static_cast<double>(v.size()), -0.2));
  };
  const auto f = conformal::kde_density_1d(offline, grid, bw(offline));
  const auto g = conformal::kde_density_1d(online, grid, bw(online));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    s += format_double(grid[i]) + ',' + format_double(f[i]) + ',' + format_double(g[i]) + '\n';
  }
  return s;
}

}  // namespace

void report(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  const fs::path runs = out / "runs";
  if (!fs::is_directory(runs) || fs::is_empty(runs)) {
    throw EmptyInputError("no monitoring records under " + runs.string());
  }
  const std::string hash = config_hash(config);
  const std::string provenance = provenance_line(config);
  const auto model = load_model(config, out);
  const auto modes = modes_of(config);
  const auto& mcfg = config.monitor;
  const std::vector<double> offline = model.offline.sorted();

  std::vector<bool> arms{false};
  if (config.il) arms.push_back(true);

  json summary;
  summary["config_hash"] = hash;
  summary["seed"] = config.seed;
  summary["study"] = config.study;
  summary["tau"] = model.tau;
  summary["epsilon"] = optional_json(model.epsilon);
  summary["delta"] = mcfg.delta;
  summary["gamma"] = mcfg.gamma;
  summary["H"] = mcfg.H;
  summary["t0"] = mcfg.t0;
  summary["offline_ncs_size"] = offline.size();
  summary["validation_mae"] = model.validation_mae;
  summary["test_mae"] = model.test_mae;

  std::string cells_csv = provenance +
                          "scenario,cell,precision_mean,precision_std,recall_mean,recall_std,"
                          "timeliness_mean,timeliness_std,coverage_mean,coverage_std,"
                          "p_exceed_tau_mean,p_exceed_tau_std,ade_mean,ade_std,tv_mean,tv_std,tp,fp,fn,tn\n";
  std::string coverage_csv = provenance + "scenario,cell,coverage_mean,coverage_std\n";
  std::string tv_csv = provenance + "scenario,tv,epsilon\n";
  std::string ade_csv = provenance + "scenario,ade_pre_mean,ade_pre_std,ade_post_mean,ade_post_std\n";
  const fs::path dir = out / "report";
  fs::remove_all(dir);

  std::string most_severe;
  double worst_rate = -1.0;
  json scenarios = json::object();
  for (const auto& name : config.scenarios) {
    const fs::path sdir = runs / name;
    if (!fs::is_directory(sdir)) throw EmptyInputError("no monitoring records for scenario " + name);
    ScenarioCounts counts;
    for (std::size_t k = 0; k < config.trials; ++k) {
      const auto c = read_listing(sdir / ("trial_" + std::to_string(k)) / "episodes.csv", hash);
      counts.episodes += c.episodes;
      counts.violating += c.violating;
      counts.skipped_short += c.skipped_short;
    }
    const double rate = counts.episodes ? static_cast<double>(counts.violating) / static_cast<double>(counts.episodes) : 0.0;
    json sj;
    sj["episodes"] = counts.episodes;
    sj["violating"] = counts.violating;
    sj["violation_rate"] = rate;
    sj["skipped_short"] = counts.skipped_short;
    if (name != "none" && rate > worst_rate) {
      worst_rate = rate;
      most_severe = name;
    }

    json cells = json::object();
    json envelopes = json::object();
    json satisfaction = json::object();
    std::vector<double> online_pre;
    std::map<bool, std::vector<double>> ade_by_arm;
    for (bool il : arms) {
      for (UqMode mode : modes) {
        const std::string cname = cell_name(mode, il);
        std::vector<metrics::MetricsSummary> trials;
        std::vector<std::vector<int>> errors;
        std::vector<std::vector<monitor::StepRecord>> runs_records;
        for (std::size_t k = 0; k < config.trials; ++k) {
          const auto eps = read_cell(sdir / ("trial_" + std::to_string(k)) / (cname + ".csv"), hash);
          std::vector<metrics::EpisodeOutcome> outcomes;
          std::vector<double> online;
          std::vector<double> ades;
          for (const auto& e : eps) {
            for (const auto& r : e.records) {
              if (r.ncs) online.push_back(*r.ncs);
              if (r.ade) ades.push_back(*r.ade);
            }
            if (mode == UqMode::ACP) {
              std::vector<int> err;
              for (const auto& r : e.records) {
                if (r.e_t) err.push_back(*r.e_t);
              }
              errors.push_back(std::move(err));
              runs_records.push_back(e.records);
            }
            outcomes.push_back(metrics::EpisodeOutcome::from_records(e.id, e.violation_time, e.records));
          }
          if (outcomes.empty()) continue;
          auto s = metrics::aggregate(outcomes, mcfg.H, model.tau);
          if (!ades.empty()) s.ade = mean_of(ades);
          if (!online.empty() && !offline.empty()) s.tv_estimate = conformal::tv_distance_estimate(offline, online);
          trials.push_back(std::move(s));
          if (!il && mode == modes.front()) online_pre.insert(online_pre.end(), online.begin(), online.end());
          if (mode == modes.front() && !ades.empty()) ade_by_arm[il].push_back(mean_of(ades));
        }
        if (trials.empty()) continue;
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (const auto& t : trials) {
          tp += t.tp;
          fp += t.fp;
          fn += t.fn;
          tn += t.tn;
        }
        const auto ts = metrics::summarize_trials(trials);
        json cj = json::parse(metrics::trial_summary_json(ts));
        cj["tp"] = tp;
        cj["fp"] = fp;
        cj["fn"] = fn;
        cj["tn"] = tn;
        cells[cname] = cj;
        cells_csv += name + ',' + cname + ',' + csv_opt(ts.precision) + ',' + csv_opt(ts.recall) + ',' +
                     csv_opt(ts.timeliness) + ',' + csv_opt(ts.empirical_coverage) + ',' +
                     csv_opt(ts.p_exceed_tau) + ',' + csv_opt(ts.ade) + ',' + csv_opt(ts.tv_estimate) + ',' +
                     std::to_string(tp) + ',' + std::to_string(fp) + ',' + std::to_string(fn) + ',' +
                     std::to_string(tn) + '\n';
        if (mode != UqMode::PP) coverage_csv += name + ',' + cname + ',' + csv_opt(ts.empirical_coverage) + '\n';

        if (mode == UqMode::ACP) {
          const auto series = metrics::pooled_envelope_series(errors, mcfg.delta, mcfg.gamma, mcfg.delta);
          write_file_atomic(dir / ("envelope_" + name + "_" + cname + ".csv"),
                            provenance + metrics::envelope_csv(series));
          envelopes[cname] = {{"within", within(series)},
                              {"points", series.size()},
                              {"episodes", errors.size()},
                              {"final_coverage", series.empty() ? json(nullptr) : json(series.back().empirical)}};
          const auto sat = metrics::alarm_free_satisfaction(runs_records, mcfg.t0, mcfg.H, mcfg.delta, mcfg.gamma);
          satisfaction[cname] = {{"steps", sat.steps},
                                 {"satisfied", sat.satisfied},
                                 {"frequency", sat.frequency},
                                 {"bound", sat.bound},
                                 {"holds", sat.holds()}};
        }
      }
    }
    sj["cells"] = cells;
    sj["envelope"] = envelopes;
    sj["satisfaction"] = satisfaction;
    if (!online_pre.empty() && !offline.empty()) {
      const double tv = conformal::tv_distance_estimate(offline, online_pre);
      sj["tv_offline_online"] = tv;
      tv_csv += name + ',' + format_double(tv) + ',' + (model.epsilon ? format_double(*model.epsilon) : "") + '\n';
    }
    auto ade_cols = [&](bool il) {
      const auto it = ade_by_arm.find(il);
      if (it == ade_by_arm.end()) return std::string(",");
      return format_double(mean_of(it->second)) + ',' + format_double(std_of(it->second));
    };
    ade_csv += name + ',' + ade_cols(false) + ',' + ade_cols(true) + '\n';
    if (ade_by_arm.contains(false)) sj["ade_pre"] = ade_by_arm[false];
    if (ade_by_arm.contains(true)) sj["ade_post"] = ade_by_arm[true];
    write_file_atomic(dir / ("ncs_kde_" + name + ".csv"), ncs_kde_csv(provenance, offline, online_pre));
    scenarios[name] = sj;
  }
  summary["most_severe"] = most_severe.empty() ? json(nullptr) : json(most_severe);
  summary["scenarios"] = scenarios;

  write_file_atomic(dir / "summary.json", dump(summary));
  write_file_atomic(dir / "cells.csv", cells_csv);
  write_file_atomic(dir / "coverage.csv", coverage_csv);
  write_file_atomic(dir / "tv.csv", tv_csv);
  write_file_atomic(dir / "ade.csv", ade_csv);
}

void sweep_cartpole(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  envs::SweepGrid grid;
  grid.gravity = config.cartpole.gravity;
  grid.pole_length = config.cartpole.pole_length;
  grid.pole_mass = config.cartpole.pole_mass;
  const auto cells = envs::cartpole_sweep(grid, cartpole_controller(config), config.cartpole.n_runs,
                                          derive_seed(config.seed, "sweep"), config.cartpole.reference_runs);
  std::string s = provenance_line(config) + "param_name,param_value,mean_reward,mean_robustness,mean_loglik\n";
  for (const auto& c : cells) {
    s += c.param_name + ',' + format_double(c.param_value) + ',' + format_double(c.mean_reward) + ',' +
         format_double(c.mean_robustness) + ',' + format_double(c.mean_loglik) + '\n';
  }
  write_file_atomic(out / "sweep" / "cartpole_sweep.csv", s);
}

}  // namespace safemon::experiment
