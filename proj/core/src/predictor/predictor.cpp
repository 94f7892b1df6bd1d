#include "safemon/predictor/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <random>

#include "safemon/error.hpp"

namespace safemon::predictor {

using nlohmann::json;

std::size_t PredictorLayout::input_dim() const {
  return h * learned_dims.size() + 2 * h * context_agents;
}

void PredictorLayout::validate() const {
  if (h == 0) throw ConfigError("h", "history length must be positive");
  if (H == 0) throw ConfigError("H", "horizon must be positive");
  if (state_dim == 0) throw ConfigError("state_dim", "state dimension must be positive");
  if (learned_dims.empty()) throw ConfigError("learned_dims", "at least one learned dimension");
  for (std::size_t j : learned_dims) {
    if (j >= state_dim) throw ConfigError("learned_dims", "index out of range");
  }
  for (std::size_t j : frame_dims) {
    if (std::find(learned_dims.begin(), learned_dims.end(), j) == learned_dims.end()) {
      throw ConfigError("frame_dims", "frame dimensions must be learned dimensions");
    }
  }
  for (std::size_t j : agent_x_dims) {
    if (j + 1 >= state_dim) throw ConfigError("agent_x_dims", "agent pair out of range");
  }
  if (context_agents > agent_x_dims.size()) {
    throw ConfigError("context_agents", "more context agents than agents");
  }
  if (context_agents > 0 && state_dim < 2) {
    throw ConfigError("context_agents", "context needs a planar ego position in dims 0 and 1");
  }
}

Normalizer Normalizer::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

Normalizer Normalizer::fit(const std::vector<double>& rows, std::size_t dim) {
  Normalizer n = identity(dim);
  const std::size_t count = rows.size() / dim;
  if (count == 0) return n;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) n.mean[j] += rows[i * dim + j];
  }
  for (double& m : n.mean) m /= static_cast<double>(count);
  std::vector<double> var(dim, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = rows[i * dim + j] - n.mean[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < dim; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(count));
    n.scale[j] = sd < 1e-8 ? 1.0 : sd;
  }
  return n;
}

void Normalizer::apply(std::span<double> x) const {
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - mean[j]) / scale[j];
}

void Normalizer::invert(std::span<double> x) const {
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = x[j] * scale[j] + mean[j];
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be nonnegative");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta", "must lie in [0,1]");
  if (batch_size == 0) throw ConfigError("batch_size", "must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction", "must lie in [0,1)");
  }
}

Predictor::Predictor(PredictorLayout layout, const std::vector<std::size_t>& hidden,
                     std::uint64_t seed)
    : layout_(std::move(layout)), seed_(seed) {
  layout_.validate();
  std::vector<std::size_t> sizes{layout_.input_dim()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(layout_.output_dim());
  network_ = Mlp::he_init(sizes, seed);
  input_norm_ = Normalizer::identity(layout_.input_dim());
  output_norm_ = Normalizer::identity(layout_.output_dim());
}

Predictor::Predictor(PredictorLayout layout, Mlp network)
    : layout_(std::move(layout)), network_(std::move(network)) {
  layout_.validate();
  if (network_.input_dim() != layout_.input_dim() ||
      network_.output_dim() != layout_.output_dim()) {
    throw ShapeError("network widths do not match the predictor layout");
  }
  input_norm_ = Normalizer::identity(layout_.input_dim());
  output_norm_ = Normalizer::identity(layout_.output_dim());
}

void Predictor::set_normalizers(Normalizer input, Normalizer output) {
  if (input.mean.size() != layout_.input_dim() || output.mean.size() != layout_.output_dim()) {
    throw ShapeError("normaliser widths do not match the predictor layout");
  }
  input_norm_ = std::move(input);
  output_norm_ = std::move(output);
}

namespace {

void check_history(const PredictorLayout& L, const Matrix& history) {
  if (history.rows != L.h || history.cols != L.state_dim) {
    throw ShapeError("history must be " + std::to_string(L.h) + "x" + std::to_string(L.state_dim));
  }
}

bool contains(const std::vector<std::size_t>& v, std::size_t x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

Matrix Predictor::baseline(const Matrix& history) const {
  const auto& L = layout_;
  Matrix out(L.H, L.state_dim);
  for (std::size_t j = 0; j < L.state_dim; ++j) {
    const double last = history(L.h - 1, j);
    const double vel = L.h >= 2 ? last - history(L.h - 2, j) : 0.0;
    for (std::size_t k = 0; k < L.H; ++k) out(k, j) = last + static_cast<double>(k + 1) * vel;
  }
  return out;
}

std::vector<double> Predictor::raw_features(const Matrix& history) const {
  const auto& L = layout_;
  check_history(L, history);
  std::vector<double> f;
  f.reserve(L.input_dim());
  const auto last = history.row(L.h - 1);
  for (std::size_t k = 0; k < L.h; ++k) {
    for (std::size_t j : L.learned_dims) {
      f.push_back(history(k, j) - (contains(L.frame_dims, j) ? last[j] : 0.0));
    }
  }
  if (L.context_agents > 0) {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t a = 0; a < L.agent_x_dims.size(); ++a) {
      const std::size_t ix = L.agent_x_dims[a];
      const double dx = last[ix] - last[0];
      const double dy = last[ix + 1] - last[1];
      order.emplace_back(dx * dx + dy * dy, a);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& p, const auto& q) { return p.first < q.first; });
    for (std::size_t c = 0; c < L.context_agents; ++c) {
      const std::size_t ix = L.agent_x_dims[order[c].second];
      for (std::size_t k = 0; k < L.h; ++k) {
        f.push_back(history(k, ix) - last[0]);
        f.push_back(history(k, ix + 1) - last[1]);
      }
    }
  }
  return f;
}

std::vector<double> Predictor::raw_targets(const Matrix& history, const Matrix& horizon) const {
  const auto& L = layout_;
  check_history(L, history);
  if (horizon.rows != L.H || horizon.cols != L.state_dim) throw ShapeError("horizon has wrong shape");
  const Matrix base = baseline(history);
  const auto last = history.row(L.h - 1);
  std::vector<double> y;
  y.reserve(L.output_dim());
  for (std::size_t k = 0; k < L.H; ++k) {
    for (std::size_t j : L.learned_dims) {
      double offset = 0.0;
      if (L.constant_velocity_baseline) {
        offset = base(k, j);
      } else if (contains(L.frame_dims, j)) {
        offset = last[j];
      }
      y.push_back(horizon(k, j) - offset);
    }
  }
  return y;
}

std::vector<double> Predictor::history_features(const Matrix& history) const {
  auto f = raw_features(history);
  input_norm_.apply(f);
  return f;
}

std::vector<double> Predictor::window_features(const Window& w) const {
  auto f = history_features(w.history);
  auto y = raw_targets(w.history, w.horizon);
  output_norm_.apply(y);
  f.insert(f.end(), y.begin(), y.end());
  return f;
}

Matrix Predictor::predict(const Matrix& history) const {
  const auto& L = layout_;
  auto f = history_features(history);
  auto y = network_.forward(f);
  output_norm_.invert(y);
  Matrix out = baseline(history);
  const auto last = history.row(L.h - 1);
  std::size_t i = 0;
  for (std::size_t k = 0; k < L.H; ++k) {
    for (std::size_t j : L.learned_dims) {
      double offset = 0.0;
      if (L.constant_velocity_baseline) {
        offset = out(k, j);
      } else if (contains(L.frame_dims, j)) {
        offset = last[j];
      }
      out(k, j) = offset + y[i++];
    }
  }
  return out;
}

namespace {

struct Dataset {
  std::vector<double> x;
  std::vector<double> y;
  std::size_t n = 0;
};

Dataset build_dataset(const Predictor& p, const std::vector<Window>& data) {
  Dataset d;
  d.n = data.size();
  d.x.reserve(d.n * p.layout().input_dim());
  d.y.reserve(d.n * p.layout().output_dim());
  for (const auto& w : data) {
    auto f = p.raw_features(w.history);
    auto t = p.raw_targets(w.history, w.horizon);
    d.x.insert(d.x.end(), f.begin(), f.end());
    d.y.insert(d.y.end(), t.begin(), t.end());
  }
  return d;
}

void normalize_rows(std::vector<double>& rows, const Normalizer& norm) {
  const std::size_t dim = norm.mean.size();
  for (std::size_t i = 0; i < rows.size(); i += dim) norm.apply(std::span<double>(rows.data() + i, dim));
}

/// beta / |S| for non-crash samples and (1 - beta) / |C| for crash samples,
/// counted over `idx` only. An empty class contributes nothing.
std::vector<double> class_weights(const std::vector<std::size_t>& idx,
                                  const std::vector<bool>& crash, double beta) {
  std::size_t nc = 0;
  for (std::size_t i : idx) nc += crash[i] ? 1 : 0;
  const std::size_t ns = idx.size() - nc;
  std::vector<double> w;
  w.reserve(idx.size());
  for (std::size_t i : idx) {
    if (crash[i]) {
      w.push_back((1.0 - beta) / static_cast<double>(nc));
    } else {
      w.push_back(beta / static_cast<double>(ns));
    }
  }
  return w;
}

void check_inputs(const std::vector<Window>& data, const std::vector<bool>& crash) {
  if (data.empty()) throw EmptyInputError("training needs at least one window");
  if (crash.size() != data.size()) throw ShapeError("one crash label per window is required");
}

/// Held-out rows used for epoch selection.
struct Holdout {
  Dataset data;
  std::vector<bool> crash;
  bool initial_is_candidate = false;
};

double dataset_loss(const Mlp& net, const Dataset& d, const std::vector<bool>& crash, double beta) {
  std::vector<std::size_t> all(d.n);
  std::iota(all.begin(), all.end(), 0);
  return net.weighted_mae(d.x, d.y, class_weights(all, crash, beta), nullptr);
}

/// Moves a seeded `fraction` of the rows of `d` into a holdout set.
Holdout split_holdout(Dataset& d, std::vector<bool>& crash, double fraction, std::uint64_t seed,
                      std::size_t in, std::size_t out) {
  Holdout h;
  if (fraction <= 0.0 || d.n < 2) return h;
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(d.n))), 1, d.n - 1);
  std::vector<std::size_t> order(d.n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> held(d.n, false);
  for (std::size_t i = 0; i < n_val; ++i) held[order[i]] = true;
  Dataset keep;
  for (std::size_t i = 0; i < d.n; ++i) {
    Dataset& dst = held[i] ? h.data : keep;
    dst.x.insert(dst.x.end(), d.x.begin() + static_cast<long>(i * in), d.x.begin() + static_cast<long>((i + 1) * in));
    dst.y.insert(dst.y.end(), d.y.begin() + static_cast<long>(i * out), d.y.begin() + static_cast<long>((i + 1) * out));
    ++dst.n;
  }
  std::vector<bool> keep_crash;
  for (std::size_t i = 0; i < d.n; ++i) (held[i] ? h.crash : keep_crash).push_back(crash[i]);
  d = std::move(keep);
  crash = std::move(keep_crash);
  return h;
}

void optimise(Mlp& net, const Dataset& d, const std::vector<bool>& crash, const TrainConfig& cfg,
              TrainReport& report, const Holdout* holdout = nullptr) {
  const std::size_t in = net.input_dim();
  const std::size_t out = net.output_dim();
  const std::size_t P = net.parameter_count();
  std::vector<bool> is_weight(P, false);
  for (std::size_t l = 0; l + 1 < net.sizes().size(); ++l) {
    for (std::size_t i = net.weight_offset(l); i < net.bias_offset(l); ++i) is_weight[i] = true;
  }
  std::vector<double> m(P, 0.0), v(P, 0.0), grad;
  std::vector<std::size_t> order(d.n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> bx, by;
  std::size_t step = 0;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const bool select = holdout != nullptr && holdout->data.n > 0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> best_params;
  if (select && holdout->initial_is_candidate) {
    best_loss = dataset_loss(net, holdout->data, holdout->crash, cfg.beta);
    best_params = net.parameters();
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.learning_rate;
    if (cfg.schedule == Schedule::Cosine && cfg.epochs > 1) {
      const double progress = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
      lr *= 0.01 + 0.99 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    }
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < d.n; start += cfg.batch_size) {
      const std::size_t end = std::min(d.n, start + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                   order.begin() + static_cast<long>(end));
      bx.clear();
      by.clear();
      for (std::size_t i : idx) {
        bx.insert(bx.end(), d.x.begin() + static_cast<long>(i * in),
                  d.x.begin() + static_cast<long>((i + 1) * in));
        by.insert(by.end(), d.y.begin() + static_cast<long>(i * out),
                  d.y.begin() + static_cast<long>((i + 1) * out));
      }
      const auto w = class_weights(idx, crash, cfg.beta);
      const double loss = net.weighted_mae(bx, by, w, &grad);
      if (!std::isfinite(loss)) {
        throw TrainingError("training loss became non-finite", static_cast<long>(epoch));
      }
      epoch_loss += loss;
      ++batches;
      ++step;
      auto& params = net.parameters();
      for (std::size_t i = 0; i < P; ++i) {
        const double g = grad[i] + (is_weight[i] ? cfg.weight_decay * params[i] : 0.0);
        if (cfg.optimizer == Optimizer::Adam) {
          m[i] = b1 * m[i] + (1.0 - b1) * g;
          v[i] = b2 * v[i] + (1.0 - b2) * g * g;
          const double mh = m[i] / (1.0 - std::pow(b1, static_cast<double>(step)));
          const double vh = v[i] / (1.0 - std::pow(b2, static_cast<double>(step)));
          params[i] -= lr * mh / (std::sqrt(vh) + eps);
        } else {
          params[i] -= lr * g;
        }
      }
    }
    const double mean_loss = epoch_loss / static_cast<double>(batches);
    if (!std::isfinite(mean_loss)) {
      throw TrainingError("training loss became non-finite", static_cast<long>(epoch));
    }
    for (double p : net.parameters()) {
      if (!std::isfinite(p)) {
        throw TrainingError("network parameters became non-finite", static_cast<long>(epoch));
      }
    }
    report.loss_curve.push_back(mean_loss);
    if (select) {
      const double held = dataset_loss(net, holdout->data, holdout->crash, cfg.beta);
      if (held < best_loss) {
        best_loss = held;
        best_params = net.parameters();
      }
    }
  }
  if (select && !best_params.empty()) net.parameters() = best_params;
  report.epochs += cfg.epochs;
  std::vector<std::size_t> all(d.n);
  std::iota(all.begin(), all.end(), 0);
  report.final_loss = net.weighted_mae(d.x, d.y, class_weights(all, crash, cfg.beta), nullptr);
}

}  // namespace

Predictor train(const std::vector<Window>& data, const std::vector<bool>& crash_labels,
                const PredictorLayout& layout, const std::vector<std::size_t>& hidden,
                const TrainConfig& cfg) {
  check_inputs(data, crash_labels);
  cfg.validate();
  Predictor p(layout, hidden, cfg.seed);
  Dataset d = build_dataset(p, data);
  p.input_norm_ = Normalizer::fit(d.x, layout.input_dim());
  p.output_norm_ = Normalizer::fit(d.y, layout.output_dim());
  normalize_rows(d.x, p.input_norm_);
  normalize_rows(d.y, p.output_norm_);
  std::vector<bool> crash = crash_labels;
  const Holdout h = split_holdout(d, crash, cfg.validation_fraction, cfg.seed, layout.input_dim(),
                                  layout.output_dim());
  optimise(p.network_, d, crash, cfg, p.report_, &h);
  return p;
}

Predictor fine_tune(const Predictor& base, const std::vector<Window>& data,
                    const std::vector<bool>& crash_labels, const TrainConfig& cfg) {
  check_inputs(data, crash_labels);
  cfg.validate();
  Predictor p = base;
  if (cfg.epochs == 0) return p;
  Dataset d = build_dataset(p, data);
  normalize_rows(d.x, p.input_norm_);
  normalize_rows(d.y, p.output_norm_);
  std::vector<bool> crash = crash_labels;
  Holdout h = split_holdout(d, crash, cfg.validation_fraction, cfg.seed, p.layout().input_dim(),
                            p.layout().output_dim());
  h.initial_is_candidate = true;
  optimise(p.network_, d, crash, cfg, p.report_, &h);
  return p;
}

double evaluate_loss(const Predictor& p, const std::vector<Window>& data,
                     const std::vector<bool>& crash_labels, double beta) {
  check_inputs(data, crash_labels);
  Dataset d = build_dataset(p, data);
  normalize_rows(d.x, p.input_normalizer());
  normalize_rows(d.y, p.output_normalizer());
  std::vector<std::size_t> all(d.n);
  std::iota(all.begin(), all.end(), 0);
  return p.network().weighted_mae(d.x, d.y, class_weights(all, crash_labels, beta), nullptr);
}

double mean_absolute_error(const Predictor& p, const std::vector<Window>& data) {
  if (data.empty()) throw EmptyInputError("mean_absolute_error needs at least one window");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& w : data) {
    const Matrix pred = p.predict(w.history);
    for (std::size_t k = 0; k < pred.rows; ++k) {
      for (std::size_t j : p.layout().learned_dims) {
        total += std::fabs(pred(k, j) - w.horizon(k, j));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

double ade(const Matrix& predicted, const Matrix& truth,
           std::pair<std::size_t, std::size_t> position_dims) {
  if (predicted.rows != truth.rows || predicted.cols != truth.cols) {
    throw ShapeError("ade inputs differ in shape");
  }
  if (predicted.rows == 0) throw EmptyInputError("ade of an empty horizon");
  const auto [ix, iy] = position_dims;
  if (ix >= truth.cols || iy >= truth.cols) throw IndexError("ade position dimension out of range");
  double total = 0.0;
  for (std::size_t k = 0; k < truth.rows; ++k) {
    const double dx = predicted(k, ix) - truth(k, ix);
    const double dy = predicted(k, iy) - truth(k, iy);
    total += std::sqrt(dx * dx + dy * dy);
  }
  return total / static_cast<double>(truth.rows);
}

namespace {

json normalizer_json(const Normalizer& n) { return {{"mean", n.mean}, {"scale", n.scale}}; }

Normalizer normalizer_from(const json& j) {
  return {j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
}

}  // namespace

std::string Predictor::to_json() const {
  json j;
  j["format"] = "safemon-predictor";
  j["version"] = 1;
  j["seed"] = seed_;
  j["layout"] = {{"h", layout_.h},
                 {"H", layout_.H},
                 {"state_dim", layout_.state_dim},
                 {"learned_dims", layout_.learned_dims},
                 {"constant_velocity_baseline", layout_.constant_velocity_baseline},
                 {"frame_dims", layout_.frame_dims},
                 {"agent_x_dims", layout_.agent_x_dims},
                 {"context_agents", layout_.context_agents}};
  j["sizes"] = network_.sizes();
  j["parameters"] = network_.parameters();
  j["input_normalizer"] = normalizer_json(input_norm_);
  j["output_normalizer"] = normalizer_json(output_norm_);
  j["training"] = {{"epochs", report_.epochs},
                   {"final_loss", report_.final_loss},
                   {"loss_curve", report_.loss_curve}};
  return j.dump(1);
}

Predictor Predictor::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("predictor file is not valid JSON: ") + e.what(), e.byte);
  }
  try {
    if (j.at("format") != "safemon-predictor" || j.at("version") != 1) {
      throw ConfigError("format", "unsupported predictor file format");
    }
    const auto& jl = j.at("layout");
    PredictorLayout L;
    L.h = jl.at("h");
    L.H = jl.at("H");
    L.state_dim = jl.at("state_dim");
    L.learned_dims = jl.at("learned_dims").get<std::vector<std::size_t>>();
    L.constant_velocity_baseline = jl.at("constant_velocity_baseline");
    L.frame_dims = jl.at("frame_dims").get<std::vector<std::size_t>>();
    L.agent_x_dims = jl.at("agent_x_dims").get<std::vector<std::size_t>>();
    L.context_agents = jl.at("context_agents");
    Mlp net(j.at("sizes").get<std::vector<std::size_t>>());
    auto params = j.at("parameters").get<std::vector<double>>();
    if (params.size() != net.parameter_count()) throw ShapeError("parameter count mismatch");
    net.parameters() = std::move(params);
    Predictor p(L, std::move(net));
    p.set_normalizers(normalizer_from(j.at("input_normalizer")),
                      normalizer_from(j.at("output_normalizer")));
    p.seed_ = j.at("seed");
    const auto& jt = j.at("training");
    p.report_.epochs = jt.at("epochs");
    p.report_.final_loss = jt.at("final_loss");
    p.report_.loss_curve = jt.at("loss_curve").get<std::vector<double>>();
    return p;
  } catch (const json::exception& e) {
    throw ConfigError("predictor", std::string("malformed predictor file: ") + e.what());
  }
}

}  // namespace safemon::predictor
