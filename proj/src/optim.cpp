#include "instashap/optim.hpp"

#include <cmath>

#include "instashap/feature_set.hpp"

namespace instashap {

Adam::Adam(std::size_t num_params, double learning_rate, double beta1,
           double beta2, double eps)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(num_params, 0.0),
      v_(num_params, 0.0) {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
}

void Adam::Step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw InvalidArgument("Adam: parameter count mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) + eps_ * std::sqrt(c2));
  }
}

}  // namespace instashap
