#include "ctta/optim.hpp"

#include <cmath>

namespace ctta::nn {

OptimizerState OptimizerState::for_params(const ParamSet& params, double lr) {
  OptimizerState s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  s.learning_rate = lr;
  return s;
}

void adam_step(ParamSet& params, const ParamSet& grads, OptimizerState& opt) {
  if (!params.same_shape(grads) || !params.same_shape(opt.m))
    throw DimensionError("adam_step: mismatched parameter/gradient shapes");
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");

  opt.step += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));

  for (std::size_t k = 0; k < params.arrays.size(); ++k) {
    auto& p = params.arrays[k].value;
    const auto& g = grads.arrays[k].value;
    auto& m = opt.m.arrays[k].value;
    auto& v = opt.v.arrays[k].value;
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = (opt.beta2 * v.array() + (1.0 - opt.beta2) * g.array().square()).matrix();
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    p.array() -= opt.learning_rate * m_hat / (v_hat.sqrt() + opt.epsilon);
  }
}

ParamSet ema_update(const ParamSet& teacher, const ParamSet& student,
                    double momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("EMA momentum must lie in [0, 1)");
  if (!teacher.same_shape(student))
    throw DimensionError("ema_update: mismatched shapes");
  ParamSet out = teacher;
  for (std::size_t k = 0; k < out.arrays.size(); ++k)
    out.arrays[k].value =
        momentum * teacher.arrays[k].value +
        (1.0 - momentum) * student.arrays[k].value;
  return out;
}

}  // namespace ctta::nn
