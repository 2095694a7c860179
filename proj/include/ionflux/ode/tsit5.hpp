#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ionflux/ad/tape.hpp"

namespace ionflux::ode {

using ad::NumArray;
using ad::Var;

/// Tsitouras 5(4) coefficients. Stage 7 is evaluated at the step end (FSAL).
struct Tsit5Tableau {
  std::array<double, 7> c;
  std::array<std::array<double, 6>, 7> a;  // a[i][j], j < i
  std::array<double, 7> b;                 // 5th-order weights (b7 = 0)
  std::array<double, 7> btilde;            // b - bhat, embedded error weights
  std::array<std::array<double, 4>, 7> r;  // dense output b_i(theta) = sum_k r[i][k] theta^(k+1)
};

const Tsit5Tableau& tsit5_tableau();

/// Dense-output weights b_i(theta) for theta in [0, 1].
std::array<double, 7> tsit5_dense_weights(double theta);

struct IntegratorConfig {
  double rtol = 1e-6;
  double atol = 1e-8;
  double initial_step = 0.0;  // <= 0: 1e-2 of the integration span
  std::size_t max_steps = 10000;
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
  double fixed_step = 0.0;  // > 0 disables error control
};

struct StepRecord {
  double t = 0.0;
  double dt = 0.0;
  double error = 0.0;
  bool accepted = false;
};

struct Trajectory {
  std::vector<double> queries;
  std::vector<Var> states;  // one tape node per query
  std::vector<StepRecord> steps;

  std::size_t accepted_steps() const;
  std::size_t rejected_steps() const;
  /// #queries x d matrix of state values.
  NumArray values() const;
};

class MaxStepsExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteDerivative : public std::runtime_error {
 public:
  NonFiniteDerivative(const std::string& what, double location)
      : std::runtime_error(what), location_(location) {}
  double location() const { return location_; }

 private:
  double location_;
};

using Dynamics = std::function<Var(Var state, double t)>;
/// Called after every trial step with whether it was accepted. The first call
/// (accepted = true) follows the initial derivative evaluation.
using StepObserver = std::function<void(bool accepted)>;

/// Integrates dh/dt = f(h, t) from queries.front() through queries.back() on
/// h0's tape. Rejected trial steps are rewound off the tape, so gradients
/// flow only through accepted steps and dense-output evaluations.
Trajectory integrate(const Dynamics& f, Var h0, std::span<const double> queries,
                     const IntegratorConfig& cfg = {}, const StepObserver& observer = {});

struct OrderStudy {
  std::vector<double> steps;
  std::vector<double> errors;      // max-norm error at t_end per step size
  std::vector<double> pair_orders; // log2(err(dt) / err(dt/2))
  double observed_order = 0.0;     // order of the finest pair
};

/// Fixed-step convergence study: integrates with coarse_step, coarse_step/2, ...
/// (levels sizes) and compares against the exact solution at t_end. Tsit5's
/// leading error coefficient is small, so pick steps in the asymptotic regime
/// (dt <~ 1/32 for unit-rate problems) but above roundoff.
OrderStudy order_verification(const Dynamics& f, const NumArray& h0, double t_end,
                              const std::function<NumArray(double)>& exact, double coarse_step,
                              int levels);

}  // namespace ionflux::ode
