#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ionflux/ad/num_array.hpp"
#include "ionflux/data/composition.hpp"
#include "ionflux/data/ions.hpp"
#include "ionflux/dspm/hindrance.hpp"

namespace ionflux::dspm {

using ad::NumArray;
using data::kNumIons;

struct MembraneParams {
  double pore_radius = 0.43e-9;  // m
  double thickness = 1.0e-6;     // effective, m
  double charge = -100.0;        // X_d, mol/m^3
};

struct SolverConfig {
  std::size_t slices = 100;
  double tol = 1e-10;  // relative charge imbalance at pore nodes and in the permeate
  std::size_t max_iterations = 50;
  double temperature = 298.15;
  HindranceCoefficients hindrance;
  std::optional<data::IonTable> ions;  // replaces the built-in table when set
};

struct PoreSolution {
  double flux = 0.0;              // J_v, m/s
  std::vector<double> x;          // slices + 1 positions, m
  NumArray conc;                  // (slices + 1) x 8, mol/m^3 inside the pore
  std::vector<double> potential;  // V, feed bulk at 0
  std::array<double, kNumIons> c_perm{};
  std::array<double, kNumIons> rejection{};
  double donnan_feed = 0.0;      // V, pore entrance minus feed bulk
  double donnan_permeate = 0.0;  // V, pore exit minus permeate bulk
  std::size_t iterations = 0;
  double residual = 0.0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Steady extended Nernst-Planck transport (Donnan + steric partitioning,
/// hindered diffusion/convection/migration) through a uniformly charged pore.
///
/// The field gradient is held constant on each slice, where the flux balance
/// has a closed-form exponential solution, so every node concentration is
/// affine in c_perm. Newton on the slice fields and the exit Donnan potential
/// drives each node and the permeate to electroneutrality, with c_perm
/// eliminated. Large fluxes are reached by continuation from a near-zero flux.
/// Ions with phi = 0 are excluded and leave with c_perm = 0. warm_start, if
/// given, seeds Newton with a solution at another flux for the same feed.
PoreSolution solve(const data::MixtureComposition& feed, double flux, const MembraneParams& membrane,
                   const SolverConfig& cfg = {}, const PoreSolution* warm_start = nullptr);

/// Two-point flux of each present ion on every slice, recomputed from the
/// stored profile, minus J_v c_perm; max over slices and ions relative to
/// the local flux magnitude.
double flux_balance_residual(const PoreSolution& sol, const data::MixtureComposition& feed,
                             const MembraneParams& membrane, const SolverConfig& cfg = {});

/// Uncharged single-solute transmission c_p / c_f from the closed form.
double uncharged_transmission(double k_c, double k_d, double phi, double flux, double thickness, double diffusivity);

}  // namespace ionflux::dspm
