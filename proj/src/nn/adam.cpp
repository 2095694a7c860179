#include "ionflux/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ionflux::nn {

void adam_step(ParamStore& params, const Gradients& grads, const AdamConfig& cfg) {
  if (grads.size() != params.size()) {
    throw ad::ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " arrays");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    if (!grads[i].same_shape(e.value)) {
      throw ad::ShapeError("adam_step: gradient " + grads[i].shape_string() + " for '" + e.name +
                           "' of shape " + e.value.shape_string());
    }
    if (!e.frozen && !grads[i].all_finite()) {
      throw ad::NonFiniteError("adam_step: non-finite gradient for '" + e.name + "'");
    }
  }

  params.set_step(params.step() + 1);
  const double t = static_cast<double>(params.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamEntry& e = params.entry(i);
    if (e.frozen) continue;
    const NumArray& g = grads[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      e.m[j] = cfg.beta1 * e.m[j] + (1.0 - cfg.beta1) * g[j];
      e.v[j] = cfg.beta2 * e.v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = e.m[j] / c1;
      const double vhat = e.v[j] / c2;
      e.value[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace ionflux::nn
