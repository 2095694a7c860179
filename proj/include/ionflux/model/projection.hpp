#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "ionflux/ad/num_array.hpp"

namespace ionflux::model {

using ad::NumArray;

class NoPresentIonsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// v - (z.v / z.z) z over present entries; absent entries are returned as is.
std::vector<double> project_electroneutral(std::span<const double> v, std::span<const double> z,
                                           const std::vector<bool>& present);

/// Matrix form restricted to present ions: I - z z^T / (z.z) on the present
/// block, zero rows and columns for absent ions.
NumArray projector_matrix(std::span<const double> z, const std::vector<bool>& present);

}  // namespace ionflux::model
