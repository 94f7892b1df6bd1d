#include "safemon/experiment/config.hpp"

#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "safemon/envs/scenario.hpp"
#include "safemon/error.hpp"
#include "safemon/monitor/monitor.hpp"

namespace safemon::experiment {

using nlohmann::json;

namespace {

std::string optimizer_name(predictor::Optimizer o) { return o == predictor::Optimizer::Adam ? "adam" : "sgd"; }
std::string schedule_name(predictor::Schedule s) { return s == predictor::Schedule::Cosine ? "cosine" : "constant"; }

json train_to_json(const predictor::TrainConfig& t) {
  return {{"epochs", t.epochs},           {"learning_rate", t.learning_rate},
          {"weight_decay", t.weight_decay}, {"beta", t.beta},
          {"batch_size", t.batch_size},     {"optimizer", optimizer_name(t.optimizer)},
          {"schedule", schedule_name(t.schedule)}, {"validation_fraction", t.validation_fraction}};
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(); }

json to_json(const ExperimentConfig& c) {
  json j;
  j["study"] = c.study;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["id_episodes"] = c.id_episodes;
  j["max_steps"] = c.max_steps;
  j["min_length"] = c.min_length;
  j["split"] = c.split;
  j["scenarios"] = c.scenarios;
  j["uq_modes"] = c.uq_modes;
  j["il"] = c.il;
  j["trials"] = c.trials;
  j["eval_episodes"] = c.eval_episodes;
  j["collection_episodes"] = c.collection_episodes;
  j["window_stride"] = c.window_stride;
  j["hidden"] = c.hidden;
  j["train"] = train_to_json(c.train);
  j["fine_tune"] = train_to_json(c.fine_tune);
  j["incremental"] = {{"k_min", c.incremental.k_min},
                      {"k_max", c.incremental.k_max},
                      {"ratio_threshold", c.incremental.ratio_threshold},
                      {"max_reference_points", c.incremental.max_reference_points}};
  const auto& m = c.monitor;
  j["monitor"] = {{"h", m.h},
                  {"H", m.H},
                  {"delta", m.delta},
                  {"gamma", m.gamma},
                  {"t0", m.t0},
                  {"tau", opt(m.tau)},
                  {"tau_quantile", m.tau_quantile},
                  {"epsilon", opt(m.epsilon)},
                  {"epsilon_step", m.epsilon_step},
                  {"append_before_threshold", m.append_before_threshold}};
  j["cartpole"] = {{"n_runs", c.cartpole.n_runs},
                   {"reference_runs", c.cartpole.reference_runs},
                   {"tune_iterations", c.cartpole.tune_iterations},
                   {"gravity", c.cartpole.gravity},
                   {"pole_length", c.cartpole.pole_length},
                   {"pole_mass", c.cartpole.pole_mass}};
  return j;
}

// Reads keys of `src` into `dst`, rejecting keys `dst` does not have.
void merge(json& dst, const json& src, const std::string& path) {
  if (!src.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : src.items()) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!dst.contains(key)) throw ConfigError(field, "unknown key");
    if (dst[key].is_object()) {
      merge(dst[key], value, field);
    } else {
      dst[key] = value;
    }
  }
}

template <class T>
T get(const json& j, const std::string& path) {
  const json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    node = &node->at(path.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, std::string("wrong type: ") + e.what());
  }
}

std::optional<double> get_opt(const json& j, const std::string& path) {
  const auto& parent = j.at(path.substr(0, path.find('.')));
  const auto& node = parent.at(path.substr(path.find('.') + 1));
  if (node.is_null()) return std::nullopt;
  return get<double>(j, path);
}

predictor::TrainConfig train_from(const json& j, const std::string& prefix) {
  predictor::TrainConfig t;
  t.epochs = get<std::size_t>(j, prefix + ".epochs");
  t.learning_rate = get<double>(j, prefix + ".learning_rate");
  t.weight_decay = get<double>(j, prefix + ".weight_decay");
  t.beta = get<double>(j, prefix + ".beta");
  t.batch_size = get<std::size_t>(j, prefix + ".batch_size");
  t.validation_fraction = get<double>(j, prefix + ".validation_fraction");
  const auto opt_name = get<std::string>(j, prefix + ".optimizer");
  if (opt_name == "adam") {
    t.optimizer = predictor::Optimizer::Adam;
  } else if (opt_name == "sgd") {
    t.optimizer = predictor::Optimizer::Sgd;
  } else {
    throw ConfigError(prefix + ".optimizer", "expected sgd or adam");
  }
  const auto sched = get<std::string>(j, prefix + ".schedule");
  if (sched == "cosine") {
    t.schedule = predictor::Schedule::Cosine;
  } else if (sched == "constant") {
    t.schedule = predictor::Schedule::Constant;
  } else {
    throw ConfigError(prefix + ".schedule", "expected constant or cosine");
  }
  return t;
}

ExperimentConfig from_json_tree(const json& j) {
  ExperimentConfig c;
  c.study = get<std::string>(j, "study");
  c.seed = get<std::uint64_t>(j, "seed");
  c.output_dir = get<std::string>(j, "output_dir");
  c.id_episodes = get<std::size_t>(j, "id_episodes");
  c.max_steps = get<std::size_t>(j, "max_steps");
  c.min_length = get<std::size_t>(j, "min_length");
  c.split = get<std::array<double, 3>>(j, "split");
  c.scenarios = get<std::vector<std::string>>(j, "scenarios");
  c.uq_modes = get<std::vector<std::string>>(j, "uq_modes");
  c.il = get<bool>(j, "il");
  c.trials = get<std::size_t>(j, "trials");
  c.eval_episodes = get<std::size_t>(j, "eval_episodes");
  c.collection_episodes = get<std::size_t>(j, "collection_episodes");
  c.window_stride = get<std::size_t>(j, "window_stride");
  c.hidden = get<std::vector<std::size_t>>(j, "hidden");
  c.train = train_from(j, "train");
  c.fine_tune = train_from(j, "fine_tune");
  c.incremental.k_min = get<std::size_t>(j, "incremental.k_min");
  c.incremental.k_max = get<std::size_t>(j, "incremental.k_max");
  c.incremental.ratio_threshold = get<double>(j, "incremental.ratio_threshold");
  c.incremental.max_reference_points = get<std::size_t>(j, "incremental.max_reference_points");
  c.monitor.h = get<std::size_t>(j, "monitor.h");
  c.monitor.H = get<std::size_t>(j, "monitor.H");
  c.monitor.delta = get<double>(j, "monitor.delta");
  c.monitor.gamma = get<double>(j, "monitor.gamma");
  c.monitor.t0 = get<std::size_t>(j, "monitor.t0");
  c.monitor.tau = get_opt(j, "monitor.tau");
  c.monitor.tau_quantile = get<double>(j, "monitor.tau_quantile");
  c.monitor.epsilon = get_opt(j, "monitor.epsilon");
  c.monitor.epsilon_step = get<double>(j, "monitor.epsilon_step");
  c.monitor.append_before_threshold = get<bool>(j, "monitor.append_before_threshold");
  c.cartpole.n_runs = get<std::size_t>(j, "cartpole.n_runs");
  c.cartpole.reference_runs = get<std::size_t>(j, "cartpole.reference_runs");
  c.cartpole.tune_iterations = get<std::size_t>(j, "cartpole.tune_iterations");
  c.cartpole.gravity = get<std::vector<double>>(j, "cartpole.gravity");
  c.cartpole.pole_length = get<std::vector<double>>(j, "cartpole.pole_length");
  c.cartpole.pole_mass = get<std::vector<double>>(j, "cartpole.pole_mass");
  c.validate();
  return c;
}

void validate_train(const predictor::TrainConfig& t, const std::string& prefix) {
  try {
    t.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + "." + e.field(), e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (study != "hallway" && study != "racetrack" && study != "cartpole") {
    throw ConfigError("study", "expected hallway, racetrack or cartpole");
  }
  double total = 0.0;
  for (double f : split) {
    if (!(f >= 0.0)) throw ConfigError("split", "fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split", "fractions must sum to 1");
  if (max_steps == 0) throw ConfigError("max_steps", "must be positive");
  if (trials == 0 && !scenarios.empty()) throw ConfigError("trials", "must be positive");
  if (window_stride == 0) throw ConfigError("window_stride", "must be positive");
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const std::string field = "scenarios[" + std::to_string(i) + "]";
    const auto s = [&] {
      try {
        return envs::OodScenario::from_name(scenarios[i]);
      } catch (const Error& e) {
        throw ConfigError(field, e.what());
      }
    }();
    using K = envs::OodScenario::Kind;
    const bool ok = s.kind == K::None || (study == "hallway" && s.is_lidar()) ||
                    (study == "racetrack" && s.kind == K::ExtraObstacles && s.count >= 1 && s.count <= 5) ||
                    (study == "cartpole" && s.kind == K::CartpoleParams);
    if (!ok) throw ConfigError(field, "scenario '" + scenarios[i] + "' does not apply to " + study);
  }
  for (std::size_t i = 0; i < uq_modes.size(); ++i) {
    try {
      (void)monitor::uq_mode_from_string(uq_modes[i]);
    } catch (const ConfigError& e) {
      throw ConfigError("uq_modes[" + std::to_string(i) + "]", e.what());
    }
  }
  validate_train(train, "train");
  validate_train(fine_tune, "fine_tune");
  if (incremental.k_min == 0 || incremental.k_max < incremental.k_min) {
    throw ConfigError("incremental.k_min", "need 1 <= k_min <= k_max");
  }
  if (!(incremental.ratio_threshold > 0.0 && incremental.ratio_threshold <= 1.0)) {
    throw ConfigError("incremental.ratio_threshold", "must lie in (0, 1]");
  }
  monitor::MonitorConfig m;
  m.h = monitor.h;
  m.H = monitor.H;
  m.delta = monitor.delta;
  m.gamma = monitor.gamma;
  m.t0 = monitor.t0;
  m.tau = monitor.tau.value_or(0.0);
  m.validate();
  if (!(monitor.tau_quantile > 0.0 && monitor.tau_quantile <= 1.0)) {
    throw ConfigError("monitor.tau_quantile", "must lie in (0, 1]");
  }
  if (monitor.epsilon && !(*monitor.epsilon >= 0.0 && *monitor.epsilon < monitor.delta)) {
    throw ConfigError("monitor.epsilon", "must satisfy 0 <= epsilon < delta");
  }
  if (!(monitor.epsilon_step > 0.0)) throw ConfigError("monitor.epsilon_step", "must be positive");
  if (cartpole.n_runs == 0) throw ConfigError("cartpole.n_runs", "must be positive");
  if (cartpole.reference_runs == 0) throw ConfigError("cartpole.reference_runs", "must be positive");
}

std::filesystem::path ExperimentConfig::output_path() const {
  if (!output_dir.empty()) return output_dir;
  const char* root = std::getenv("SAFEMON_OUTPUT_ROOT");
  return std::filesystem::path(root && *root ? root : "safemon_out") / study;
}

ExperimentConfig default_config(const std::string& study) {
  ExperimentConfig c;
  c.study = study;
  c.train.epochs = 40;
  c.train.learning_rate = 1e-3;
  c.train.optimizer = predictor::Optimizer::Adam;
  c.train.schedule = predictor::Schedule::Cosine;
  c.fine_tune = c.train;
  c.fine_tune.epochs = 30;
  c.fine_tune.learning_rate = 5e-4;
  c.fine_tune.validation_fraction = 0.2;
  if (study == "hallway") {
    c.max_steps = 200;
    c.scenarios = {"none", "drop_rays_3", "drop_rays_5", "lidar_noise_0.9", "lidar_noise_1"};
    c.monitor.tau_quantile = 0.8;
    c.fine_tune.beta = 1.0;
  } else if (study == "racetrack") {
    c.max_steps = 300;
    c.scenarios = {"none", "obstacles_2", "obstacles_3", "obstacles_4", "obstacles_5"};
    c.monitor.tau_quantile = 0.5;
  } else if (study == "cartpole") {
    c.max_steps = 20;
    c.min_length = 20;
    c.scenarios = {};
    c.il = false;
  } else {
    throw ConfigError("study", "expected hallway, racetrack or cartpole");
  }
  return c;
}

ExperimentConfig config_from_json(const std::string& text) {
  json src;
  try {
    src = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  if (!src.is_object()) throw ConfigError("<root>", "expected an object");
  const std::string study = src.contains("study") && src["study"].is_string()
                                ? src["study"].get<std::string>()
                                : std::string("hallway");
  json tree = to_json(default_config(study));
  merge(tree, src, "");
  return from_json_tree(tree);
}

std::string config_to_json(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

ExperimentConfig apply_override(const ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json tree = to_json(config);
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError(path, "unknown key");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError(path, "cannot replace a whole section");
  *node = value;
  return from_json_tree(tree);
}

std::string config_hash(const ExperimentConfig& config) {
  // output_dir is where results go, not what they are; it is left out.
  json j = to_json(config);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return splitmix64(splitmix64(base ^ h) + index);
}

std::string provenance_line(const ExperimentConfig& config) {
  return "# config_hash=" + config_hash(config) + " seed=" + std::to_string(config.seed) + "\n";
}

}  // namespace safemon::experiment
