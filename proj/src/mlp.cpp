#include "instashap/mlp.hpp"

#include <cmath>
#include <random>

#include "instashap/feature_set.hpp"

namespace instashap {

namespace {

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

}  // namespace

Mlp::Mlp(MlpSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  if (spec_.input_dim < 1 || spec_.output_dim < 1) {
    throw InvalidArgument("MLP dimensions must be positive");
  }
  std::vector<int> widths = {spec_.input_dim};
  for (int h : spec_.hidden) {
    if (h < 1) throw InvalidArgument("hidden width must be positive");
    widths.push_back(h);
  }
  widths.push_back(spec_.output_dim);

  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    LayerView v{widths[l], widths[l + 1], offset, 0};
    offset += static_cast<std::size_t>(v.in) * v.out;
    v.b_offset = offset;
    offset += v.out;
    layers_.push_back(v);
  }
  params_.assign(offset, 0.0);
  grads_.assign(offset, 0.0);

  // He initialization for ReLU layers, biases zero.
  std::mt19937_64 rng(seed);
  for (const auto& layer : layers_) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / layer.in));
    for (std::size_t i = 0; i < static_cast<std::size_t>(layer.in) * layer.out; ++i) {
      params_[layer.w_offset + i] = normal(rng);
    }
  }
}

void Mlp::ZeroGrad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

const Eigen::MatrixXd& Mlp::Forward(const Eigen::MatrixXd& x) {
  if (x.cols() != spec_.input_dim) throw InvalidArgument("MLP input width mismatch");
  activations_.resize(layers_.size() + 1);
  activations_[0] = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    ConstMatMap w(params_.data() + layer.w_offset, layer.out, layer.in);
    ConstVecMap b(params_.data() + layer.b_offset, layer.out);
    Eigen::MatrixXd h = activations_[l] * w.transpose();
    h.rowwise() += b.transpose();
    if (l + 1 < layers_.size()) h = h.cwiseMax(0.0);
    activations_[l + 1] = std::move(h);
  }
  return activations_.back();
}

void Mlp::Backward(const Eigen::MatrixXd& grad_out) {
  Eigen::MatrixXd g = grad_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    MatMap gw(grads_.data() + layer.w_offset, layer.out, layer.in);
    VecMap gb(grads_.data() + layer.b_offset, layer.out);
    gw.noalias() += g.transpose() * activations_[l];
    gb += g.colwise().sum().transpose();
    if (l == 0) break;
    ConstMatMap w(params_.data() + layer.w_offset, layer.out, layer.in);
    Eigen::MatrixXd prev = g * w;
    // ReLU derivative from the stored post-activation.
    prev = prev.cwiseProduct((activations_[l].array() > 0.0).cast<double>().matrix());
    g = std::move(prev);
  }
}

Eigen::MatrixXd Mlp::Predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != spec_.input_dim) throw InvalidArgument("MLP input width mismatch");
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    ConstMatMap w(params_.data() + layer.w_offset, layer.out, layer.in);
    ConstVecMap b(params_.data() + layer.b_offset, layer.out);
    Eigen::MatrixXd next = h * w.transpose();
    next.rowwise() += b.transpose();
    if (l + 1 < layers_.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

void Mlp::SetParams(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw InvalidArgument("MLP parameter count mismatch");
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

}  // namespace instashap
