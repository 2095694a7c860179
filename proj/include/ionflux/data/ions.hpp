#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace ionflux::data {

inline constexpr std::size_t kNumIons = 8;

struct IonSpec {
  std::string_view name;
  int valence = 0;
  double stokes_radius = 0.0;  // m
  double diffusivity = 0.0;    // m^2/s, infinite dilution at 25 C
};

using IonTable = std::array<IonSpec, kNumIons>;

/// Fixed vocabulary order: Na+, K+, Li+, Mg2+, Ca2+, Cl-, SO42-, NO3-.
/// Every column index in every matrix of the library refers to this order.
const IonTable& ion_table();

/// Index of an ion by name; throws std::invalid_argument for unknown names.
std::size_t ion_index(std::string_view name);

std::array<double, kNumIons> valences();

}  // namespace ionflux::data
