#include "safemon/incremental/dp_set.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "safemon/error.hpp"

namespace safemon::incremental {

using predictor::Matrix;
using predictor::Predictor;
using predictor::Window;

Prototype Prototype::fit(const std::vector<Point>& members, std::string label) {
  if (members.empty()) throw EmptyInputError("prototype needs at least one member");
  const std::size_t dim = members.front().size();
  Prototype p;
  p.label = std::move(label);
  p.member_count = members.size();
  p.center.assign(dim, 0.0);
  p.scale.assign(dim, 0.0);
  const double n = static_cast<double>(members.size());
  for (const auto& m : members) {
    for (std::size_t j = 0; j < dim; ++j) p.center[j] += m[j];
  }
  for (double& c : p.center) c /= n;
  for (const auto& m : members) {
    for (std::size_t j = 0; j < dim; ++j) p.scale[j] += (m[j] - p.center[j]) * (m[j] - p.center[j]);
  }
  for (double& s : p.scale) s = std::max(std::sqrt(s / n), 1e-6);
  return p;
}

double Prototype::log_likelihood(std::span<const double> x) const {
  if (x.size() > center.size()) throw ShapeError("query longer than prototype");
  double ll = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double z = (x[j] - center[j]) / scale[j];
    ll += -0.5 * z * z - std::log(scale[j]) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return ll;
}

DistributionPredictorSet::DistributionPredictorSet(Predictor base,
                                                   const std::vector<Window>& training) {
  std::vector<Point> feats;
  feats.reserve(training.size());
  for (const auto& w : training) feats.push_back(base.window_features(w));
  entries_.push_back({Prototype::fit(feats, "base"), std::move(base)});
}

DistributionPredictorSet::DistributionPredictorSet(Prototype base_prototype, Predictor base) {
  entries_.push_back({std::move(base_prototype), std::move(base)});
}

void DistributionPredictorSet::append(Prototype prototype, Predictor predictor) {
  if (entries_.empty()) throw ConfigError("dp", "append needs a base entry first");
  if (prototype.center.size() != entries_.front().prototype.center.size()) {
    throw ShapeError("prototype dimension differs from the base prototype");
  }
  entries_.push_back({std::move(prototype), std::move(predictor)});
}

std::size_t DistributionPredictorSet::select(const Matrix& history) const {
  if (entries_.empty()) throw EmptyInputError("distribution-predictor set is empty");
  if (entries_.size() == 1) return 0;
  const auto f = base().history_features(history);
  std::size_t best = 0;
  double best_ll = entries_[0].prototype.log_likelihood(f);
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    const double ll = entries_[i].prototype.log_likelihood(f);
    if (ll > best_ll) {
      best_ll = ll;
      best = i;
    }
  }
  return best;
}

std::pair<const Predictor*, std::string> select_predictor(const DistributionPredictorSet& dp,
                                                          const Matrix& history) {
  const auto& e = dp[dp.select(history)];
  return {&e.predictor, e.prototype.label};
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void DistributionPredictorSet::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "safemon-dp";
  manifest["version"] = 1;
  manifest["entries"] = nlohmann::json::array();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    const std::string file = "predictor_" + std::to_string(i) + ".json";
    write_file(dir / file, e.predictor.to_json());
    manifest["entries"].push_back({{"label", e.prototype.label},
                                   {"center", e.prototype.center},
                                   {"scale", e.prototype.scale},
                                   {"member_count", e.prototype.member_count},
                                   {"predictor_file", file}});
  }
  write_file(dir / "manifest.json", manifest.dump(1));
}

DistributionPredictorSet DistributionPredictorSet::load(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("manifest.json is not valid JSON", e.byte);
  }
  DistributionPredictorSet dp;
  try {
    if (manifest.at("format") != "safemon-dp" || manifest.at("version") != 1) {
      throw ConfigError("format", "unsupported distribution-predictor manifest");
    }
    for (const auto& je : manifest.at("entries")) {
      Prototype p;
      p.label = je.at("label");
      p.center = je.at("center").get<std::vector<double>>();
      p.scale = je.at("scale").get<std::vector<double>>();
      p.member_count = je.at("member_count");
      auto pred = Predictor::from_json(read_file(dir / je.at("predictor_file").get<std::string>()));
      dp.entries_.push_back({std::move(p), std::move(pred)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest", std::string("malformed manifest: ") + e.what());
  }
  if (dp.entries_.empty()) throw ConfigError("entries", "manifest lists no entries");
  return dp;
}

UpdateResult incremental_update(const DistributionPredictorSet& dp, const std::vector<Window>& W,
                                const std::vector<bool>& W_crash,
                                const std::vector<Window>& reference, const Predictor& base,
                                const IncrementalConfig& cfg) {
  if (W.empty()) throw EmptyInputError("incremental_update needs high-error windows");
  if (W_crash.size() != W.size()) throw ShapeError("one crash label per window is required");
  if (cfg.k_min == 0 || cfg.k_max < cfg.k_min) throw ConfigError("k_range", "need 1 <= k_min <= k_max");

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> ref_idx(reference.size());
  std::iota(ref_idx.begin(), ref_idx.end(), 0);
  std::shuffle(ref_idx.begin(), ref_idx.end(), rng);
  const std::size_t cap = cfg.max_reference_points == 0 ? W.size() : cfg.max_reference_points;
  ref_idx.resize(std::min(ref_idx.size(), cap));
  std::sort(ref_idx.begin(), ref_idx.end());

  std::vector<Point> points;
  std::vector<bool> from_w;
  for (const auto& w : W) {
    points.push_back(base.window_features(w));
    from_w.push_back(true);
  }
  for (std::size_t i : ref_idx) {
    points.push_back(base.window_features(reference[i]));
    from_w.push_back(false);
  }

  std::vector<std::size_t> ks;
  for (std::size_t k = cfg.k_min; k <= std::min(cfg.k_max, points.size()); ++k) ks.push_back(k);
  if (ks.empty()) throw EmptyInputError("not enough windows for the smallest k");

  UpdateResult r;
  r.dp = dp;
  r.k = elbow_select_k(points, ks, cfg.seed);
  const auto km = kmeans(points, r.k, cfg.seed);
  r.admitted = admit_clusters(km.assignments, from_w, cfg.ratio_threshold);
  r.no_cluster_admitted = r.admitted.empty();

  // Prototypes of admitted clusters. Each W window is then routed with the
  // same history likelihood used for runtime selection, so every new
  // predictor is tuned on the histories it will actually be chosen for.
  DistributionPredictorSet routing = dp;
  std::vector<std::size_t> candidates;
  for (std::size_t c : r.admitted) {
    std::vector<Point> members;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (km.assignments[i] == c) members.push_back(points[i]);
    }
    routing.append(Prototype::fit(members, ""), base);
    candidates.push_back(c);
  }
  std::vector<std::vector<std::size_t>> routed(routing.size());
  for (std::size_t i = 0; i < W.size(); ++i) routed[routing.select(W[i].history)].push_back(i);

  std::vector<std::size_t> appended;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const auto& idx = routed[dp.size() + j];
    if (idx.empty()) continue;
    std::vector<Window> windows;
    std::vector<bool> crash;
    for (std::size_t i : idx) {
      windows.push_back(W[i]);
      crash.push_back(W_crash[i]);
    }
    Prototype proto = routing[dp.size() + j].prototype;
    proto.label = "D" + std::to_string(r.dp.size());
    auto tuned = predictor::fine_tune(base, windows, crash, cfg.fine_tune);
    r.dp.append(std::move(proto), std::move(tuned));
    appended.push_back(candidates[j]);
  }
  r.admitted = appended;
  r.no_cluster_admitted = appended.empty();
  return r;
}

}  // namespace safemon::incremental
