#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace instashap {

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden = {128, 128};
  int output_dim = 1;
};

// Fully connected ReLU network with a linear output layer. Parameters live in
// one flat vector so a single optimizer instance can drive them.
class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<const double> grads() const { return grads_; }
  void ZeroGrad();

  // Batch rows in, batch rows out. Keeps activations for Backward.
  const Eigen::MatrixXd& Forward(const Eigen::MatrixXd& x);
  // Accumulates parameter gradients given dLoss/dOutput for the last Forward.
  void Backward(const Eigen::MatrixXd& grad_out);
  // Stateless inference.
  Eigen::MatrixXd Predict(const Eigen::MatrixXd& x) const;

  // Replaces parameters (checkpoint restore / deserialization).
  void SetParams(std::span<const double> values);

 private:
  struct LayerView {
    int in;
    int out;
    std::size_t w_offset;
    std::size_t b_offset;
  };

  MlpSpec spec_;
  std::vector<LayerView> layers_;
  std::vector<double> params_;
  std::vector<double> grads_;
  std::vector<Eigen::MatrixXd> activations_;  // input + post-ReLU hidden + output
};

}  // namespace instashap
