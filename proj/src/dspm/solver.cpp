#include "ionflux/dspm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include <Eigen/Dense>

namespace ionflux::dspm {

namespace {

constexpr double kFaraday = 96485.33212;
constexpr double kGas = 8.314462618;
constexpr double kColdStartFlux = 1e-10;  // m/s

struct Active {
  std::size_t ion = 0;
  double z = 0.0;
  double phi = 0.0;
  double k_d = 0.0;
  double k_c = 0.0;
  double diff = 0.0;
  double c_feed = 0.0;
};

// expm1(y)/y and its derivative, with series near 0.
double phi1(double y) { return std::abs(y) < 1e-4 ? 1.0 + y / 2.0 + y * y / 6.0 : std::expm1(y) / y; }

// Safeguarded Newton on a bracketed root of f; fdf returns (f, f').
double root_1d(const std::function<std::pair<double, double>(double)>& fdf, double x0, double step) {
  double lo = x0 - step, hi = x0 + step;
  double flo = fdf(lo).first, fhi = fdf(hi).first;
  for (int k = 0; k < 200 && flo * fhi > 0.0; ++k) {
    const double w = hi - lo;
    lo -= w;
    hi += w;
    flo = fdf(lo).first;
    fhi = fdf(hi).first;
  }
  if (!(flo * fhi <= 0.0)) throw std::runtime_error("root_1d: no sign change");
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  double x = std::clamp(x0, lo, hi);
  for (int it = 0; it < 200; ++it) {
    auto [f, df] = fdf(x);
    if (f == 0.0) return x;
    if ((f < 0.0) == (flo < 0.0)) {
      lo = x;
      flo = f;
    } else {
      hi = x;
    }
    double xn = x - f / df;
    if (!(xn > lo && xn < hi) || !std::isfinite(xn)) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) <= 1e-15 * std::max(1.0, std::abs(x)) || hi - lo <= 1e-15 * std::max(1.0, std::abs(x))) {
      return xn;
    }
    x = xn;
  }
  return x;
}

struct Problem {
  std::vector<Active> ions;
  double flux = 0.0;
  double thickness = 0.0;
  double charge = 0.0;
  std::size_t slices = 0;
  double xi_feed = 0.0;
};

// Donnan partition at an interface: sum z phi c exp(-z xi) + X = 0.
double donnan(const std::vector<Active>& ions, const std::vector<double>& bulk, double charge) {
  auto fdf = [&](double xi) {
    double f = charge, df = 0.0;
    for (std::size_t k = 0; k < ions.size(); ++k) {
      const double t = ions[k].z * ions[k].phi * bulk[k] * std::exp(-ions[k].z * xi);
      f += t;
      df -= ions[k].z * t;
    }
    return std::make_pair(f, df);
  };
  return root_1d(fdf, 0.0, 1.0);
}

// Unknowns u = (gamma_0 .. gamma_{N-1}, xi_L): the dimensionless potential
// drop on each slice and the exit Donnan potential. For a fixed field each
// ion obeys a linear recurrence c_{s+1} = E_s c_s - P_s c_p, so c(L) is
// affine in c_p and the exit partition c(L) = phi c_p exp(-z xi_L) gives c_p
// in closed form.
struct Profile {
  std::vector<std::vector<double>> c;  // node -> active ion
  std::vector<double> c_perm;
};

Profile profile(const Problem& p, const Eigen::VectorXd& u) {
  const std::size_t n = p.ions.size();
  const std::size_t N = p.slices;
  const double dx = p.thickness / static_cast<double>(N);
  const double xi_l = u[static_cast<Eigen::Index>(N)];
  Profile pr;
  pr.c.assign(N + 1, std::vector<double>(n));
  pr.c_perm.resize(n);
  std::vector<double> A(N + 1), B(N + 1);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = p.ions[k];
    const double alpha = a.k_c * p.flux / (a.k_d * a.diff) * dx;
    const double pe = p.flux / (a.k_d * a.diff) * dx;
    A[0] = a.phi * a.c_feed * std::exp(-a.z * p.xi_feed);
    B[0] = 0.0;
    for (std::size_t s = 0; s < N; ++s) {
      const double y = alpha - a.z * u[static_cast<Eigen::Index>(s)];
      const double e = std::exp(y);
      A[s + 1] = e * A[s];
      B[s + 1] = e * B[s] + pe * phi1(y);
    }
    const double cp = A[N] / (B[N] + a.phi * std::exp(-a.z * xi_l));
    pr.c_perm[k] = cp;
    for (std::size_t s = 0; s <= N; ++s) pr.c[s][k] = A[s] - B[s] * cp;
  }
  return pr;
}

// Node electroneutrality for nodes 1..N relative to the entrance charge
// scale, then permeate neutrality relative to sum |z| c_p. When jac is given
// it receives the analytic Jacobian with respect to u.
Eigen::VectorXd residual(const Problem& p, const Eigen::VectorXd& u, bool* negative = nullptr,
                         Eigen::MatrixXd* jac = nullptr) {
  const std::size_t n = p.ions.size();
  const std::size_t N = p.slices;
  const auto dim = static_cast<Eigen::Index>(N + 1);
  const double dx = p.thickness / static_cast<double>(N);
  const double xi_l = u[static_cast<Eigen::Index>(N)];

  std::vector<double> A(N + 1), B(N + 1), E(N), dP(N);
  std::vector<double> charge(N + 1, p.charge);
  double neutral = 0.0, total = 0.0, scale = std::abs(p.charge);
  bool neg = false;
  // Per ion: d c_s / d u, accumulated into the node-charge Jacobian.
  Eigen::MatrixXd dq;
  Eigen::VectorXd dneutral, dtotal;
  if (jac) {
    dq = Eigen::MatrixXd::Zero(dim, dim);  // row s = node s (row 0 unused)
    dneutral = Eigen::VectorXd::Zero(dim);
    dtotal = Eigen::VectorXd::Zero(dim);
  }
  Eigen::VectorXd dcp(dim);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = p.ions[k];
    const double z = a.z;
    const double alpha = a.k_c * p.flux / (a.k_d * a.diff) * dx;
    const double pe = p.flux / (a.k_d * a.diff) * dx;
    A[0] = a.phi * a.c_feed * std::exp(-z * p.xi_feed);
    B[0] = 0.0;
    for (std::size_t s = 0; s < N; ++s) {
      const double y = alpha - z * u[static_cast<Eigen::Index>(s)];
      E[s] = std::exp(y);
      A[s + 1] = E[s] * A[s];
      B[s + 1] = E[s] * B[s] + pe * phi1(y);
      if (jac) {
        const double dphi1 = std::abs(y) < 1e-4 ? 0.5 + y / 3.0 + y * y / 8.0 : (E[s] * (y - 1.0) + 1.0) / (y * y);
        dP[s] = E[s] * B[s] + pe * dphi1;  // d B_{s+1} / d y_s
      }
    }
    const double exit = a.phi * std::exp(-z * xi_l);
    const double den = B[N] + exit;
    const double cp = A[N] / den;
    scale += std::abs(z) * A[0];
    for (std::size_t s = 1; s <= N; ++s) {
      const double c = A[s] - B[s] * cp;
      neg |= c < 0.0;
      charge[s] += z * c;
    }
    neutral += z * cp;
    total += std::abs(z) * cp;
    if (!jac) continue;

    // dy_t/dgamma_t = -z; dA_s/dgamma_t = -z A_s and
    // dB_s/dgamma_t = -z (A_s / A_{t+1}) dP_t for t < s.
    for (std::size_t t = 0; t < N; ++t) dcp[static_cast<Eigen::Index>(t)] = -z * (A[N] - cp * (A[N] / A[t + 1]) * dP[t]) / den;
    dcp[static_cast<Eigen::Index>(N)] = z * exit * cp / den;
    for (std::size_t s = 1; s <= N; ++s) {
      auto row = dq.row(static_cast<Eigen::Index>(s));
      for (std::size_t t = 0; t < s; ++t) {
        const double dA = -z * A[s];
        const double dB = -z * (A[s] / A[t + 1]) * dP[t];
        row[static_cast<Eigen::Index>(t)] += z * (dA - dB * cp);
      }
      for (Eigen::Index t = 0; t < dim; ++t) row[t] -= z * B[s] * dcp[t];
    }
    dneutral += z * dcp;
    dtotal += std::abs(z) * dcp;
  }

  Eigen::VectorXd r(dim);
  for (std::size_t s = 1; s <= N; ++s) r[static_cast<Eigen::Index>(s - 1)] = charge[s] / scale;
  const double rn = total > 0.0 ? neutral / total : 1.0;
  r[dim - 1] = rn;
  if (jac) {
    jac->resize(dim, dim);
    jac->topRows(dim - 1) = dq.bottomRows(dim - 1) / scale;
    jac->row(dim - 1) = ((dneutral - rn * dtotal) / total).transpose();
  }
  if (negative) *negative = neg;
  return r;
}

std::optional<Eigen::VectorXd> newton(const Problem& p, Eigen::VectorXd u, double tol, std::size_t max_iter,
                                      std::size_t& iterations, double& res_norm) {
  Eigen::MatrixXd jac;
  Eigen::VectorXd r = residual(p, u, nullptr, &jac);
  if (!r.allFinite()) return std::nullopt;
  res_norm = r.lpNorm<Eigen::Infinity>();
  bool converged = res_norm < tol;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd step = jac.partialPivLu().solve(r);
    if (!step.allFinite()) return std::nullopt;
    // Damping 0.5 while an iterate has negative concentrations or the
    // residual grows.
    double damp = 1.0;
    Eigen::VectorXd un, rn;
    bool ok = false;
    for (int tries = 0; tries < 30; ++tries, damp *= 0.5) {
      un = u - damp * step;
      bool negative = false;
      rn = residual(p, un, &negative);
      if (!rn.allFinite() || negative) continue;
      if (rn.lpNorm<Eigen::Infinity>() <= res_norm) {
        ok = true;
        break;
      }
    }
    if (!ok) break;
    const double new_norm = rn.lpNorm<Eigen::Infinity>();
    ++iterations;
    u = un;
    const bool progress = new_norm < 0.5 * res_norm;
    res_norm = new_norm;
    if (converged) break;  // one polishing step past tolerance
    converged = res_norm < tol;
    if (!converged && !progress && it >= 8) break;
    r = residual(p, u, nullptr, &jac);
  }
  if (!converged) return std::nullopt;
  return u;
}

}  // namespace

double uncharged_transmission(double k_c, double k_d, double phi, double flux, double thickness,
                              double diffusivity) {
  const double pe = k_c * flux * thickness / (k_d * diffusivity);
  return k_c * phi / (1.0 - (1.0 - k_c * phi) * std::exp(-pe));
}

PoreSolution solve(const data::MixtureComposition& feed, double flux, const MembraneParams& membrane,
                   const SolverConfig& cfg, const PoreSolution* warm_start) {
  if (!(flux >= 0.0) || !std::isfinite(flux)) throw std::invalid_argument("solve: flux must be finite and >= 0");
  if (!(membrane.pore_radius > 0.0 && membrane.thickness > 0.0)) {
    throw std::invalid_argument("solve: pore radius and thickness must be positive");
  }
  if (cfg.slices == 0) throw std::invalid_argument("solve: need at least one slice");

  const auto& table = cfg.ions ? *cfg.ions : data::ion_table();
  Problem p;
  p.flux = flux;
  p.thickness = membrane.thickness;
  p.charge = membrane.charge;
  p.slices = cfg.slices;
  for (std::size_t j = 0; j < kNumIons; ++j) {
    if (!feed.present[j]) continue;
    const Hindrance h = hindrance_factors(table[j].stokes_radius / membrane.pore_radius, cfg.hindrance);
    if (h.phi == 0.0 || feed.c_in[j] <= 0.0) continue;
    p.ions.push_back({j, static_cast<double>(table[j].valence), h.phi, h.k_d, h.k_c, table[j].diffusivity,
                      feed.c_in[j]});
  }
  const std::size_t n = p.ions.size();
  bool pos = false, neg = false;
  for (const auto& a : p.ions) (a.z > 0 ? pos : neg) = true;
  if (!pos || !neg) throw SolverError("solve: pore admits ions of one sign only", 0.0);

  std::vector<double> bulk(n);
  for (std::size_t k = 0; k < n; ++k) bulk[k] = p.ions[k].c_feed;
  p.xi_feed = donnan(p.ions, bulk, p.charge);

  const double rt_f = kGas * cfg.temperature / kFaraday;
  const std::size_t N = cfg.slices;
  PoreSolution sol;
  sol.flux = flux;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N + 1));
  u[static_cast<Eigen::Index>(N)] = p.xi_feed;
  if (flux > 0.0) {
    double j_done = 0.0;
    if (warm_start && warm_start->flux > 0.0 && warm_start->flux <= flux && warm_start->potential.size() == N + 1) {
      for (std::size_t s = 0; s < N; ++s) {
        u[static_cast<Eigen::Index>(s)] = (warm_start->potential[s + 1] - warm_start->potential[s]) / rt_f;
      }
      u[static_cast<Eigen::Index>(N)] = warm_start->donnan_permeate / rt_f;
      j_done = warm_start->flux;
    }
    // Flux continuation. A cold start begins near equilibrium and grows
    // geometrically, since rejection can saturate within a tiny flux.
    double growth = 8.0;
    std::size_t iters = 0;
    double res = 0.0;
    while (j_done < flux) {
      const double target = j_done == 0.0 ? std::min(flux, kColdStartFlux) : std::min(flux, j_done * growth);
      p.flux = target;
      auto r = newton(p, u, cfg.tol, cfg.max_iterations, iters, res);
      if (r) {
        u = *r;
        j_done = target;
        growth = std::min(growth * growth, 1e6);
      } else {
        if (j_done == 0.0) {
          throw SolverError("solve: Newton failed near equilibrium (residual " + std::to_string(res) + ")", res);
        }
        growth = std::sqrt(growth);
        if (growth < 1.0 + 1e-6) {
          throw SolverError("solve: Newton failed to converge at J_v = " + std::to_string(target) +
                                " m/s (residual " + std::to_string(res) + ")",
                            res);
        }
      }
    }
    p.flux = flux;
    sol.iterations = iters;
    sol.residual = res;
  }

  const Profile pr = profile(p, u);
  const double dx = membrane.thickness / static_cast<double>(N);
  sol.x.resize(N + 1);
  sol.conc = NumArray(N + 1, kNumIons, 0.0);
  sol.potential.resize(N + 1);
  sol.donnan_feed = p.xi_feed * rt_f;
  double xi = p.xi_feed;
  for (std::size_t s = 0; s <= N; ++s) {
    sol.x[s] = dx * static_cast<double>(s);
    for (std::size_t k = 0; k < n; ++k) sol.conc(s, p.ions[k].ion) = pr.c[s][k];
    sol.potential[s] = xi * rt_f;
    if (s < N) xi += u[static_cast<Eigen::Index>(s)];
  }
  sol.donnan_permeate = u[static_cast<Eigen::Index>(N)] * rt_f;
  for (std::size_t j = 0; j < kNumIons; ++j)
    if (feed.present[j] && flux == 0.0) sol.c_perm[j] = feed.c_in[j];
  if (flux > 0.0)
    for (std::size_t k = 0; k < n; ++k) sol.c_perm[p.ions[k].ion] = pr.c_perm[k];
  for (std::size_t j = 0; j < kNumIons; ++j)
    if (feed.present[j] && feed.c_in[j] > 0.0) sol.rejection[j] = 1.0 - sol.c_perm[j] / feed.c_in[j];
  return sol;
}

double flux_balance_residual(const PoreSolution& sol, const data::MixtureComposition& feed,
                             const MembraneParams& membrane, const SolverConfig& cfg) {
  const auto& table = cfg.ions ? *cfg.ions : data::ion_table();
  const double f_rt = kFaraday / (kGas * cfg.temperature);
  double worst = 0.0;
  for (std::size_t j = 0; j < kNumIons; ++j) {
    if (!feed.present[j]) continue;
    const Hindrance h = hindrance_factors(table[j].stokes_radius / membrane.pore_radius, cfg.hindrance);
    if (h.phi == 0.0) continue;
    const double z = table[j].valence;
    const double kdd = h.k_d * table[j].diffusivity;
    const double target = sol.flux * sol.c_perm[j];
    for (std::size_t s = 0; s + 1 < sol.x.size(); ++s) {
      const double dx = sol.x[s + 1] - sol.x[s];
      const double gamma = (sol.potential[s + 1] - sol.potential[s]) * f_rt;
      const double y = h.k_c * sol.flux / kdd * dx - z * gamma;
      const double c0 = sol.conc(s, j), c1 = sol.conc(s + 1, j);
      // c1 = c0 e^y - (J c_p dx / K_d D) phi1(y)  =>  flux = K_d D (c0 e^y - c1) / (dx phi1(y))
      const double flux = kdd * (c0 * std::exp(y) - c1) / (dx * phi1(y));
      const double mag = std::abs(target) + h.k_c * sol.flux * std::max(c0, c1);
      if (mag > 0.0) worst = std::max(worst, std::abs(flux - target) / mag);
    }
  }
  return worst;
}

}  // namespace ionflux::dspm
