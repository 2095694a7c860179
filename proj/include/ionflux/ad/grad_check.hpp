#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ionflux/ad/tape.hpp"
#include "ionflux/nn/param_store.hpp"

namespace ionflux::ad {

/// Scalar objective built on a fresh tape from the bound parameters.
using ScalarObjective = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckArray {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckArray> arrays;
  double max_rel_error = 0.0;
  bool pass = false;
};

/// Compares reverse-mode gradients with central differences for every entry
/// of every array. Per-array error is max|g_ad - g_fd| divided by the largest
/// gradient magnitude seen in that array (floored at 1e-8).
GradCheckReport gradient_check(const ScalarObjective& f, const nn::ParamStore& params,
                               double eps = 1e-5, double tol = 1e-5);

}  // namespace ionflux::ad
