// Ion constants.
//
// Diffusivities: limiting ionic diffusion coefficients at 25 C, CRC Handbook
// of Chemistry and Physics, "Ionic Conductivity and Diffusion at Infinite
// Dilution" (values in 1e-9 m^2/s: Na+ 1.334, K+ 1.957, Li+ 1.029,
// Mg2+ 0.706, Ca2+ 0.792, Cl- 2.032, SO4 2- 1.065, NO3- 1.902).
//
// Stokes radii: Stokes-Einstein r = kT / (6 pi mu D) at T = 298.15 K,
// mu = 0.890 mPa s (water), i.e. r = 2.454e-19 / D, rounded to 1 pm.
// Edit both columns together; nothing else depends on the literal values.

#include "ionflux/data/ions.hpp"

#include <stdexcept>
#include <string>

namespace ionflux::data {

const IonTable& ion_table() {
  static const IonTable table{{
      {"Na+", 1, 0.184e-9, 1.334e-9},
      {"K+", 1, 0.125e-9, 1.957e-9},
      {"Li+", 1, 0.238e-9, 1.029e-9},
      {"Mg2+", 2, 0.348e-9, 0.706e-9},
      {"Ca2+", 2, 0.310e-9, 0.792e-9},
      {"Cl-", -1, 0.121e-9, 2.032e-9},
      {"SO42-", -2, 0.230e-9, 1.065e-9},
      {"NO3-", -1, 0.129e-9, 1.902e-9},
  }};
  return table;
}

std::size_t ion_index(std::string_view name) {
  const auto& t = ion_table();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].name == name) return i;
  throw std::invalid_argument("unknown ion '" + std::string(name) + "'");
}

std::array<double, kNumIons> valences() {
  std::array<double, kNumIons> z{};
  for (std::size_t i = 0; i < kNumIons; ++i) z[i] = ion_table()[i].valence;
  return z;
}

}  // namespace ionflux::data
