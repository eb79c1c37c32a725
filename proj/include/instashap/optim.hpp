#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace instashap {

// Adaptive-moment stochastic gradient over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t num_params, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  void Step(std::span<double> params, std::span<const double> grads);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace instashap
