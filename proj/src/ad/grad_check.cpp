#include "ionflux/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ionflux::ad {

namespace {

double evaluate(const ScalarObjective& f, const nn::ParamStore& params) {
  Tape tape;
  auto bound = params.bind(tape, true);
  Var out = f(tape, bound);
  if (out.value().size() != 1) throw std::invalid_argument("gradient_check: objective is not scalar");
  const double v = out.value()[0];
  if (!std::isfinite(v)) throw NonFiniteError("gradient_check: objective is non-finite");
  return v;
}

}  // namespace

GradCheckReport gradient_check(const ScalarObjective& f, const nn::ParamStore& params, double eps,
                               double tol) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw std::invalid_argument("gradient_check: eps must lie in [1e-7, 1e-3]");
  }

  nn::Gradients analytic = params.zero_gradients();
  {
    Tape tape;
    auto bound = params.bind(tape, true);
    Var out = f(tape, bound);
    if (!std::isfinite(out.value()[0])) throw NonFiniteError("gradient_check: objective is non-finite");
    tape.backward(out);
    params.accumulate(tape, bound, analytic);
  }

  GradCheckReport report;
  nn::ParamStore probe = params;
  for (std::size_t a = 0; a < params.size(); ++a) {
    NumArray& x = probe.entry(a).value;
    double max_diff = 0.0, scale = 1e-8;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + eps;
      const double fp = evaluate(f, probe);
      x[i] = orig - eps;
      const double fm = evaluate(f, probe);
      x[i] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      const double ad = analytic[a][i];
      max_diff = std::max(max_diff, std::abs(fd - ad));
      scale = std::max({scale, std::abs(fd), std::abs(ad)});
    }
    const double rel = max_diff / scale;
    report.arrays.push_back({params.entry(a).name, rel});
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

}  // namespace ionflux::ad
