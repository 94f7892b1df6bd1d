#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "safemon/predictor/matrix.hpp"
#include "safemon/predictor/mlp.hpp"

namespace safemon::predictor {

/// How a history window is turned into network inputs and how network outputs
/// are turned back into absolute states.
struct PredictorLayout {
  std::size_t h = 5;
  std::size_t H = 5;
  std::size_t state_dim = 4;
  /// State dimensions forecast by the network. The rest are extrapolated at
  /// constant velocity.
  std::vector<std::size_t> learned_dims{0, 1, 2, 3};
  /// When set, the network forecasts a residual on top of constant-velocity
  /// extrapolation instead of the state itself.
  bool constant_velocity_baseline = false;
  /// Learned dimensions expressed relative to their last observed value.
  std::vector<std::size_t> frame_dims;
  /// First index of each other agent's (x, y) pair.
  std::vector<std::size_t> agent_x_dims;
  /// Number of nearest agents whose relative positions are fed to the network.
  std::size_t context_agents = 0;

  [[nodiscard]] std::size_t input_dim() const;
  [[nodiscard]] std::size_t output_dim() const { return H * learned_dims.size(); }
  /// Throws ConfigError when an index is out of range or a size is zero.
  void validate() const;

  friend bool operator==(const PredictorLayout&, const PredictorLayout&) = default;
};

/// Per-feature affine normalisation x -> (x - mean) / scale.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Normalizer identity(std::size_t dim);
  /// Mean and standard deviation per column; scales below 1e-8 become 1.
  static Normalizer fit(const std::vector<double>& rows, std::size_t dim);
  void apply(std::span<double> x) const;
  void invert(std::span<double> x) const;

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

enum class Optimizer { Sgd, Adam };
enum class Schedule { Constant, Cosine };

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  /// Weight of non-crash windows in the loss mix; crash windows get 1 - beta.
  double beta = 0.5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Sgd;
  /// Cosine decays the step size from learning_rate to 1% of it over training.
  Schedule schedule = Schedule::Constant;
  /// Share of windows held out to choose the best epoch by held-out loss. For
  /// fine-tuning the starting network is a candidate too, so the result is
  /// never worse than the base on the held-out part. 0 keeps the last epoch.
  double validation_fraction = 0.0;

  void validate() const;
};

struct TrainReport {
  std::size_t epochs = 0;
  double final_loss = 0.0;
  std::vector<double> loss_curve;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

/// Trajectory predictor: feature map + normalisation + network.
class Predictor {
 public:
  Predictor() = default;
  /// Network widths are input_dim, hidden..., output_dim; weights He-initialised.
  Predictor(PredictorLayout layout, const std::vector<std::size_t>& hidden, std::uint64_t seed);
  /// Wraps an existing network; normalisers default to identity.
  Predictor(PredictorLayout layout, Mlp network);

  /// h x d history -> H x d absolute states.
  [[nodiscard]] Matrix predict(const Matrix& history) const;

  /// Unnormalised network input for one history.
  [[nodiscard]] std::vector<double> raw_features(const Matrix& history) const;
  /// Unnormalised network target for one window.
  [[nodiscard]] std::vector<double> raw_targets(const Matrix& history, const Matrix& horizon) const;
  /// Normalised inputs followed by normalised targets; used for clustering.
  [[nodiscard]] std::vector<double> window_features(const Window& w) const;
  /// Normalised inputs only.
  [[nodiscard]] std::vector<double> history_features(const Matrix& history) const;

  [[nodiscard]] const PredictorLayout& layout() const { return layout_; }
  [[nodiscard]] const Mlp& network() const { return network_; }
  [[nodiscard]] Mlp& network() { return network_; }
  [[nodiscard]] const Normalizer& input_normalizer() const { return input_norm_; }
  [[nodiscard]] const Normalizer& output_normalizer() const { return output_norm_; }
  void set_normalizers(Normalizer input, Normalizer output);
  [[nodiscard]] const TrainReport& report() const { return report_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  [[nodiscard]] std::string to_json() const;
  static Predictor from_json(const std::string& text);

  friend bool operator==(const Predictor&, const Predictor&) = default;

 private:
  friend Predictor train(const std::vector<Window>&, const std::vector<bool>&,
                         const PredictorLayout&, const std::vector<std::size_t>&,
                         const TrainConfig&);
  friend Predictor fine_tune(const Predictor&, const std::vector<Window>&,
                             const std::vector<bool>&, const TrainConfig&);
  [[nodiscard]] Matrix baseline(const Matrix& history) const;

  PredictorLayout layout_;
  Mlp network_;
  Normalizer input_norm_;
  Normalizer output_norm_;
  TrainReport report_;
  std::uint64_t seed_ = 0;
};

/// Fits normalisers on `data`, then minimises
/// beta * MAE(non-crash) + (1 - beta) * MAE(crash) by mini-batch descent.
/// Throws TrainingError when the loss becomes non-finite.
Predictor train(const std::vector<Window>& data, const std::vector<bool>& crash_labels,
                const PredictorLayout& layout, const std::vector<std::size_t>& hidden,
                const TrainConfig& cfg);

/// Continues optimisation from `base` with its frozen normalisers.
Predictor fine_tune(const Predictor& base, const std::vector<Window>& data,
                    const std::vector<bool>& crash_labels, const TrainConfig& cfg);

/// Loss of `p` on `data` under the same weighting as training.
double evaluate_loss(const Predictor& p, const std::vector<Window>& data,
                     const std::vector<bool>& crash_labels, double beta);

/// Mean absolute error of `p` on `data` in raw state units over learned dims.
double mean_absolute_error(const Predictor& p, const std::vector<Window>& data);

/// Mean over rows of the Euclidean distance between the two position columns.
double ade(const Matrix& predicted, const Matrix& truth,
           std::pair<std::size_t, std::size_t> position_dims);

}  // namespace safemon::predictor
