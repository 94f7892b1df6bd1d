#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace safemon::predictor {

/// Fully connected network with ReLU hidden layers and a linear output.
///
/// Parameters live in one flat vector; layer l stores its weight matrix
/// (out x in, column-major) followed by its bias vector.
class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialised network with the given layer widths (input first).
  explicit Mlp(std::vector<std::size_t> sizes);

  /// He-normal weights, zero biases.
  static Mlp he_init(std::vector<std::size_t> sizes, std::uint64_t seed);

  [[nodiscard]] std::size_t input_dim() const { return sizes_.front(); }
  [[nodiscard]] std::size_t output_dim() const { return sizes_.back(); }
  [[nodiscard]] const std::vector<std::size_t>& sizes() const { return sizes_; }
  [[nodiscard]] const std::vector<double>& parameters() const { return params_; }
  [[nodiscard]] std::vector<double>& parameters() { return params_; }
  [[nodiscard]] std::size_t parameter_count() const { return params_.size(); }

  /// Offset of layer l's weights and biases inside parameters().
  [[nodiscard]] std::size_t weight_offset(std::size_t layer) const;
  [[nodiscard]] std::size_t bias_offset(std::size_t layer) const;

  /// Forward pass on one input vector.
  [[nodiscard]] std::vector<double> forward(std::span<const double> input) const;

  /// Forward pass on `count` inputs stored contiguously; outputs likewise.
  [[nodiscard]] std::vector<double> forward_batch(std::span<const double> inputs,
                                                  std::size_t count) const;

  /// Weighted mean-absolute-error loss sum_i w_i * mean_j |y_ij - t_ij| and its
  /// gradient with respect to parameters(); sign(0) is taken as 0.
  double weighted_mae(std::span<const double> inputs, std::span<const double> targets,
                      std::span<const double> sample_weights, std::vector<double>* gradient) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<double> params_;
};

}  // namespace safemon::predictor
