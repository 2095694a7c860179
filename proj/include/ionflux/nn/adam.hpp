#pragma once

#include "ionflux/nn/param_store.hpp"

namespace ionflux::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of every unfrozen array. Gradients are
/// validated before anything is written; a non-finite gradient throws and
/// leaves the store untouched.
void adam_step(ParamStore& params, const Gradients& grads, const AdamConfig& cfg = {});

}  // namespace ionflux::nn
