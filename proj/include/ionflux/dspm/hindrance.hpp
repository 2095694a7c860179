#pragma once

#include <array>

namespace ionflux::dspm {

/// Polynomial closures for hindered transport in a cylindrical pore.
/// K_d = sum_k kd[k] lambda^k (Renkin),
/// K_c = (2 - phi) * sum_k kc[k] lambda^k (Bowen and Welfoot).
struct HindranceCoefficients {
  std::array<double, 6> kd{1.0, -2.104, 0.0, 2.09, 0.0, -0.95};
  std::array<double, 4> kc{1.0, 0.054, -0.988, 0.441};
};

struct Hindrance {
  double k_d = 1.0;
  double k_c = 1.0;
  double phi = 1.0;  // steric partition coefficient (1 - lambda)^2
};

/// lambda >= 1 returns phi = K_d = K_c = 0 (species excluded from the pore).
Hindrance hindrance_factors(double lambda, const HindranceCoefficients& coeffs = {});

}  // namespace ionflux::dspm
