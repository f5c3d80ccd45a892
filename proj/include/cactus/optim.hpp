#pragma once

#include <cstdint>
#include <utility>

#include "cactus/model.hpp"

namespace cactus {

enum class OptimizerKind : std::uint8_t { Sgd = 0, Adam = 1 };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  ModelParams first_moment;
  ModelParams second_moment;
  std::uint64_t step = 0;

  bool operator==(const OptimizerState&) const = default;
};

OptimizerState make_adam_state(const ModelParams& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                               double epsilon = 1e-8);

ModelParams apply_sgd(const ModelParams& params, const ModelParams& grads, double lr);

// Adam with bias correction. Returns updated params and state; the inputs are not modified.
std::pair<ModelParams, OptimizerState> apply_adam(const ModelParams& params, const ModelParams& grads,
                                                  const OptimizerState& state);

}  // namespace cactus
