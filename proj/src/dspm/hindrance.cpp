#include "ionflux/dspm/hindrance.hpp"

#include <stdexcept>

namespace ionflux::dspm {

Hindrance hindrance_factors(double lambda, const HindranceCoefficients& coeffs) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("hindrance_factors: lambda must be >= 0");
  if (lambda >= 1.0) return {0.0, 0.0, 0.0};
  Hindrance h;
  h.phi = (1.0 - lambda) * (1.0 - lambda);
  double kd = 0.0;
  for (std::size_t k = coeffs.kd.size(); k-- > 0;) kd = kd * lambda + coeffs.kd[k];
  double kc = 0.0;
  for (std::size_t k = coeffs.kc.size(); k-- > 0;) kc = kc * lambda + coeffs.kc[k];
  h.k_d = kd;
  h.k_c = (2.0 - h.phi) * kc;
  if (!(h.k_d > 0.0 && h.k_c > 0.0)) {
    throw std::domain_error("hindrance_factors: non-positive K_d or K_c at lambda " + std::to_string(lambda));
  }
  return h;
}

}  // namespace ionflux::dspm
