#include "safemon/predictor/mlp.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "safemon/error.hpp"

namespace safemon::predictor {

namespace {

using Mat = Eigen::MatrixXd;
using MapMat = Eigen::Map<Mat>;
using ConstMapMat = Eigen::Map<const Mat>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

std::size_t count_parameters(const std::vector<std::size_t>& sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * (sizes[l] + 1);
  return n;
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ShapeError("network needs at least input and output widths");
  for (std::size_t s : sizes_) {
    if (s == 0) throw ShapeError("network layer width must be positive");
  }
  params_.assign(count_parameters(sizes_), 0.0);
}

Mlp Mlp::he_init(std::vector<std::size_t> sizes, std::uint64_t seed) {
  Mlp net(std::move(sizes));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(net.sizes_[l])));
    const std::size_t begin = net.weight_offset(l);
    const std::size_t end = net.bias_offset(l);
    for (std::size_t i = begin; i < end; ++i) net.params_[i] = dist(rng);
  }
  return net;
}

std::size_t Mlp::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += sizes_[l + 1] * (sizes_[l] + 1);
  return off;
}

std::size_t Mlp::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + sizes_[layer + 1] * sizes_[layer];
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  return forward_batch(input, 1);
}

std::vector<double> Mlp::forward_batch(std::span<const double> inputs, std::size_t count) const {
  if (inputs.size() != count * input_dim()) throw ShapeError("network input has wrong size");
  Mat act = ConstMapMat(inputs.data(), static_cast<Eigen::Index>(input_dim()),
                        static_cast<Eigen::Index>(count));
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    ConstMapMat W(params_.data() + weight_offset(l), static_cast<Eigen::Index>(sizes_[l + 1]),
                  static_cast<Eigen::Index>(sizes_[l]));
    ConstMapVec b(params_.data() + bias_offset(l), static_cast<Eigen::Index>(sizes_[l + 1]));
    Mat next = W * act;
    next.colwise() += b;
    if (l + 1 < layers) next = next.cwiseMax(0.0);
    act = std::move(next);
  }
  return {act.data(), act.data() + act.size()};
}

double Mlp::weighted_mae(std::span<const double> inputs, std::span<const double> targets,
                         std::span<const double> sample_weights,
                         std::vector<double>* gradient) const {
  const std::size_t count = sample_weights.size();
  if (inputs.size() != count * input_dim() || targets.size() != count * output_dim()) {
    throw ShapeError("loss inputs and targets disagree with network widths");
  }
  const std::size_t layers = sizes_.size() - 1;
  const auto n = static_cast<Eigen::Index>(count);

  std::vector<Mat> acts;  // post-activation per layer, acts[0] = input
  acts.reserve(layers + 1);
  acts.emplace_back(ConstMapMat(inputs.data(), static_cast<Eigen::Index>(input_dim()), n));
  for (std::size_t l = 0; l < layers; ++l) {
    ConstMapMat W(params_.data() + weight_offset(l), static_cast<Eigen::Index>(sizes_[l + 1]),
                  static_cast<Eigen::Index>(sizes_[l]));
    ConstMapVec b(params_.data() + bias_offset(l), static_cast<Eigen::Index>(sizes_[l + 1]));
    Mat z = W * acts.back();
    z.colwise() += b;
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }

  ConstMapMat T(targets.data(), static_cast<Eigen::Index>(output_dim()), n);
  ConstMapVec w(sample_weights.data(), n);
  const Mat residual = acts.back() - T;
  const double inv_out = 1.0 / static_cast<double>(output_dim());
  const double loss = (residual.cwiseAbs().colwise().sum().transpose().cwiseProduct(w)).sum() * inv_out;
  if (gradient == nullptr) return loss;

  gradient->assign(params_.size(), 0.0);
  Mat delta = residual.unaryExpr([](double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); });
  delta = delta * (w * inv_out).asDiagonal();
  for (std::size_t l = layers; l-- > 0;) {
    MapMat gW(gradient->data() + weight_offset(l), static_cast<Eigen::Index>(sizes_[l + 1]),
              static_cast<Eigen::Index>(sizes_[l]));
    Eigen::Map<Eigen::VectorXd> gb(gradient->data() + bias_offset(l),
                                   static_cast<Eigen::Index>(sizes_[l + 1]));
    gW.noalias() = delta * acts[l].transpose();
    gb = delta.rowwise().sum();
    if (l == 0) break;
    ConstMapMat W(params_.data() + weight_offset(l), static_cast<Eigen::Index>(sizes_[l + 1]),
                  static_cast<Eigen::Index>(sizes_[l]));
    Mat back = W.transpose() * delta;
    // ReLU derivative: active units have positive output.
    delta = back.cwiseProduct(acts[l].unaryExpr([](double a) { return a > 0.0 ? 1.0 : 0.0; }));
  }
  return loss;
}

}  // namespace safemon::predictor
