#include "cactus/optim.hpp"

#include <cmath>

namespace cactus {

OptimizerState make_adam_state(const ModelParams& params, double lr, double beta1, double beta2, double epsilon) {
  if (!(lr > 0.0)) throw ContractError("learning rate must be positive");
  OptimizerState s;
  s.kind = OptimizerKind::Adam;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  s.first_moment = zeros_like(params);
  s.second_moment = zeros_like(params);
  return s;
}

ModelParams apply_sgd(const ModelParams& params, const ModelParams& grads, double lr) {
  check_same_shape(params, grads, "apply_sgd");
  return add_scaled(params, grads, -lr);
}

std::pair<ModelParams, OptimizerState> apply_adam(const ModelParams& params, const ModelParams& grads,
                                                  const OptimizerState& state) {
  check_same_shape(params, grads, "apply_adam");
  check_same_shape(params, state.first_moment, "apply_adam first moment");
  check_same_shape(params, state.second_moment, "apply_adam second moment");

  OptimizerState next = state;
  next.step = state.step + 1;
  const double t = static_cast<double>(next.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  ModelParams out = params;

  auto update = [&](std::vector<double>& x, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      x[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  };
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    update(out.layers[l].weight.data(), grads.layers[l].weight.data(), next.first_moment.layers[l].weight.data(),
           next.second_moment.layers[l].weight.data());
    update(out.layers[l].bias, grads.layers[l].bias, next.first_moment.layers[l].bias,
           next.second_moment.layers[l].bias);
  }
  return {std::move(out), std::move(next)};
}

}  // namespace cactus
