#include "ionflux/ode/tsit5.hpp"

#include <algorithm>
#include <cmath>

namespace ionflux::ode {

namespace {

Tsit5Tableau make_tableau() {
  Tsit5Tableau t{};
  t.c = {0.0, 0.161, 0.327, 0.9, 0.9800255409045097, 1.0, 1.0};

  t.a[1] = {0.161};
  t.a[2] = {-0.008480655492356989, 0.335480655492357};
  t.a[3] = {2.897153057105493, -6.359448489975075, 4.3622954328695815};
  t.a[4] = {5.325864828439257, -11.748883564062828, 7.4955393428898365, -0.09249506636175525};
  t.a[5] = {5.86145544294642, -12.92096931784711, 8.159367898576159, -0.071584973281401,
            -0.028269050394068383};
  t.a[6] = {0.09646076681806523, 0.01, 0.4798896504144996, 1.379008574103742, -3.290069515436081,
            2.324710524099774};

  for (int j = 0; j < 6; ++j) t.b[j] = t.a[6][j];
  t.b[6] = 0.0;

  t.btilde = {-0.00178001105222577714, -0.0008164344596567469, 0.007880878010261995,
              -0.1447110071732629,     0.5823571654525552,     -0.45808210592918697,
              0.015151515151515152};

  t.r[0] = {1.0, -2.763706197274826, 2.9132554618219126, -1.0530884977290216};
  t.r[1] = {0.0, 0.13169999999999998, -0.2234, 0.1017};
  t.r[2] = {0.0, 3.9302962368947516, -5.941033872131505, 2.490627285651253};
  t.r[3] = {0.0, -12.411077166933676, 30.33818863028232, -16.548102889244902};
  t.r[4] = {0.0, 37.50931341651104, -88.1789048947664, 47.37952196281928};
  t.r[5] = {0.0, -27.896526289197286, 65.09189467479366, -34.87065786149661};
  t.r[6] = {0.0, 1.5, -4.0, 2.5};
  return t;
}

}  // namespace

const Tsit5Tableau& tsit5_tableau() {
  static const Tsit5Tableau tableau = make_tableau();
  return tableau;
}

std::array<double, 7> tsit5_dense_weights(double theta) {
  const auto& tb = tsit5_tableau();
  std::array<double, 7> w{};
  for (int i = 0; i < 7; ++i) {
    double p = 0.0;
    for (int k = 3; k >= 0; --k) p = (p + tb.r[i][k]) * theta;
    w[i] = p;
  }
  return w;
}

std::size_t Trajectory::accepted_steps() const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const StepRecord& s) { return s.accepted; }));
}

std::size_t Trajectory::rejected_steps() const { return steps.size() - accepted_steps(); }

NumArray Trajectory::values() const {
  if (states.empty()) return NumArray(0, 0);
  const std::size_t d = states.front().value().size();
  NumArray out(states.size(), d, 0.0);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const NumArray& v = states[i].value();
    for (std::size_t j = 0; j < d; ++j) out(i, j) = v[j];
  }
  return out;
}

Trajectory integrate(const Dynamics& f, Var h0, std::span<const double> queries,
                     const IntegratorConfig& cfg, const StepObserver& observer) {
  if (queries.empty()) throw std::invalid_argument("integrate: no query points");
  for (std::size_t i = 1; i < queries.size(); ++i) {
    if (!(queries[i] >= queries[i - 1])) throw std::invalid_argument("integrate: queries must be ascending");
  }
  if (!(cfg.rtol > 0.0 && cfg.atol > 0.0 && cfg.max_steps > 0)) {
    throw std::invalid_argument("integrate: rtol, atol and max_steps must be positive");
  }

  const auto& tb = tsit5_tableau();
  ad::Tape& tape = *h0.tape();
  const double t0 = queries.front();
  const double t_end = queries.back();
  const double span = t_end - t0;

  Trajectory traj;
  traj.queries.assign(queries.begin(), queries.end());
  traj.states.reserve(queries.size());

  auto eval = [&](Var h, double t) {
    try {
      Var k = f(h, t);
      if (k.value().size() != h.value().size()) {
        throw ad::ShapeError("integrate: derivative size " + std::to_string(k.value().size()) +
                             " differs from state size " + std::to_string(h.value().size()));
      }
      return k;
    } catch (const ad::NonFiniteError& e) {
      throw NonFiniteDerivative("non-finite derivative at flux " + std::to_string(t) + ": " + e.what(), t);
    }
  };

  std::size_t next = 0;
  while (next < queries.size() && queries[next] == t0) {
    traj.states.push_back(h0);
    ++next;
  }
  if (next == queries.size()) return traj;

  Var h = h0;
  double t = t0;
  Var k1 = eval(h, t);
  if (observer) observer(true);

  double dt = cfg.fixed_step > 0.0 ? cfg.fixed_step : (cfg.initial_step > 0.0 ? cfg.initial_step : 1e-2 * span);
  const std::size_t d = h0.value().size();
  std::array<Var, 7> k;
  std::array<double, 6> coeff{};

  while (next < queries.size()) {
    if (traj.steps.size() >= cfg.max_steps) {
      throw MaxStepsExceeded("integrate: exceeded " + std::to_string(cfg.max_steps) +
                             " steps at flux " + std::to_string(t));
    }
    dt = std::min(dt, t_end - t);
    const std::size_t mark = tape.mark();

    k[0] = k1;
    Var h_new;
    try {
      for (int s = 1; s < 7; ++s) {
        for (int j = 0; j < s; ++j) coeff[j] = dt * tb.a[s][j];
        Var stage = ad::lincomb(h, std::span<const double>(coeff.data(), s), std::span<const Var>(k.data(), s));
        if (s == 6) h_new = stage;
        k[s] = eval(stage, t + tb.c[s] * dt);
      }
    } catch (const ad::NonFiniteError& e) {
      throw NonFiniteDerivative("non-finite state near flux " + std::to_string(t) + ": " + e.what(), t);
    }

    double norm = 0.0;
    const NumArray& hv = h.value();
    const NumArray& hn = h_new.value();
    for (std::size_t i = 0; i < d; ++i) {
      double err = 0.0;
      for (int s = 0; s < 7; ++s) err += tb.btilde[s] * k[s].value()[i];
      err *= dt;
      const double sc = cfg.atol + cfg.rtol * std::max(std::abs(hv[i]), std::abs(hn[i]));
      norm += (err / sc) * (err / sc);
    }
    norm = std::sqrt(norm / static_cast<double>(d));

    const bool accept = cfg.fixed_step > 0.0 || norm <= 1.0;
    traj.steps.push_back({t, dt, norm, accept});
    if (!accept) {
      tape.rewind(mark);
      if (observer) observer(false);
      dt *= std::max(cfg.min_factor, cfg.safety * std::pow(norm, -0.2));
      continue;
    }

    double t_new = t + dt;
    if (t_end - t_new <= 1e-13 * std::max(1.0, std::abs(span))) t_new = t_end;
    while (next < queries.size() && queries[next] <= t_new) {
      const double q = queries[next];
      if (q == t_new) {
        traj.states.push_back(h_new);
      } else {
        const auto w = tsit5_dense_weights((q - t) / dt);
        std::array<double, 7> c{};
        for (int s = 0; s < 7; ++s) c[s] = dt * w[s];
        traj.states.push_back(ad::lincomb(h, c, k));
      }
      ++next;
    }
    if (observer) observer(true);

    t = t_new;
    h = h_new;
    k1 = k[6];
    if (cfg.fixed_step <= 0.0) {
      const double factor = norm == 0.0 ? cfg.max_factor : cfg.safety * std::pow(norm, -0.2);
      dt *= std::clamp(factor, cfg.min_factor, cfg.max_factor);
    }
  }
  return traj;
}

OrderStudy order_verification(const Dynamics& f, const NumArray& h0, double t_end,
                              const std::function<NumArray(double)>& exact, double coarse_step,
                              int levels) {
  OrderStudy study;
  const NumArray truth = exact(t_end);
  double step = coarse_step;
  for (int l = 0; l < levels; ++l, step *= 0.5) {
    ad::Tape tape;
    IntegratorConfig cfg;
    cfg.fixed_step = step;
    cfg.max_steps = 1u << 24;
    const std::array<double, 2> q{0.0, t_end};
    Trajectory tr = integrate(f, tape.constant(h0), q, cfg);
    const NumArray& y = tr.states.back().value();
    double err = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) err = std::max(err, std::abs(y[i] - truth[i]));
    study.steps.push_back(step);
    study.errors.push_back(err);
  }
  for (std::size_t i = 1; i < study.errors.size(); ++i) {
    study.pair_orders.push_back(std::log2(study.errors[i - 1] / study.errors[i]));
  }
  if (!study.pair_orders.empty()) study.observed_order = study.pair_orders.back();
  return study;
}

}  // namespace ionflux::ode
