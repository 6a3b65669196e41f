#include "mcseg/nn/adam.hpp"

#include <cmath>

namespace mcseg::nn {

AdamState AdamState::for_parameter(const Tensor& param, const AdamConfig& config) {
  AdamState state;
  state.m = Tensor(param.shape());
  state.v = Tensor(param.shape());
  state.beta1 = config.beta1;
  state.beta2 = config.beta2;
  state.epsilon = config.epsilon;
  return state;
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr) {
  if (param.shape() != grad.shape() || state.m.shape() != param.shape() || state.v.shape() != param.shape()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment shapes must agree");
  }
  for (double g : grad.values()) {
    if (!std::isfinite(g)) throw NonFiniteGradient("adam_step: non-finite gradient entry");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace mcseg::nn
