#pragma once

#include <cstdint>

#include "ctta/net.hpp"

namespace ctta::nn {

struct OptimizerState {
  ParamSet m;  // first moments, shaped like the parameters
  ParamSet v;  // second moments
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerState for_params(const ParamSet& params, double lr);
};

// Bias-corrected Adam update, in place. Increments the step counter.
void adam_step(ParamSet& params, const ParamSet& grads, OptimizerState& opt);

// momentum * teacher + (1 - momentum) * student, element-wise.
// momentum must lie in [0, 1).
ParamSet ema_update(const ParamSet& teacher, const ParamSet& student,
                    double momentum);

}  // namespace ctta::nn
