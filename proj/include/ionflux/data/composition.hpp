#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

#include "ionflux/data/ions.hpp"

namespace ionflux::data {

/// Feed concentrations (mol/m^3) over the ion vocabulary plus presence mask.
struct MixtureComposition {
  std::array<double, kNumIons> c_in{};
  std::array<bool, kNumIons> present{};

  std::size_t count() const;
  double max_concentration() const;
  /// sum_j z_j c_j over present ions.
  double charge_residual() const;

  friend bool operator==(const MixtureComposition&, const MixtureComposition&) = default;
};

class ElectroneutralityError : public std::invalid_argument {
 public:
  ElectroneutralityError(const std::string& what, double residual)
      : std::invalid_argument(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class MissingCounterIonError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kNeutralityRtol = 1e-6;

/// Mask is c > 0.
MixtureComposition validate_composition(std::span<const double> c);
/// Explicit mask, for files where a present ion may sit at 0 mol/m^3.
MixtureComposition validate_composition(std::span<const double> c, std::span<const bool> present);

/// Random electroneutral mixture of 2-5 ions with at least one cation and one
/// anion. Cation concentrations are log-uniform in [lo, hi]; anions are drawn
/// the same way and then rescaled together to cancel the cation charge.
MixtureComposition sample_composition(std::mt19937_64& rng, double lo = 1.0, double hi = 100.0);

}  // namespace ionflux::data
