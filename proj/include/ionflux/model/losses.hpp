#pragma once

#include <span>
#include <vector>

#include "ionflux/ad/tape.hpp"

namespace ionflux::model {

using ad::NumArray;
using ad::Var;

/// (1 / (k d')) sum over rows and present ions of (pred - target)^2, with d'
/// the number of present ions.
Var pretrain_loss(Var pred, const NumArray& target, const std::vector<bool>& present);
double pretrain_loss(const NumArray& pred, const NumArray& target, const std::vector<bool>& present);

/// Same form as pretrain_loss, applied to noisy measurements.
Var finetune_loss(Var pred, const NumArray& noisy, const std::vector<bool>& present);
double finetune_loss(const NumArray& pred, const NumArray& noisy, const std::vector<bool>& present);

/// Mean over rows of (sum_j z_j h_j)^2, present ions only.
Var soft_penalty(Var states, std::span<const double> z, const std::vector<bool>& present);
double soft_penalty(const NumArray& states, std::span<const double> z, const std::vector<bool>& present);

}  // namespace ionflux::model
