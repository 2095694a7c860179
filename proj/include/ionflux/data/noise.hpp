#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "ionflux/data/dataset.hpp"

namespace ionflux::data {

/// sigma_ij = rel * mu_ij + abs_frac * max_j(mu_ij) over present ions.
struct NoiseModel {
  double rel = 0.02;
  double abs_frac = 0.01;
};

/// Fills sample.sigma from sample.conc.
void assign_sigma(RolloutSample& sample, const NoiseModel& model = {});

/// Standard normal keyed by (seed, stream, epoch, i, j); no state.
double keyed_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t epoch, std::uint64_t i,
                    std::uint64_t j);

/// FNV-1a hash of a sample id, used as the noise stream key.
std::uint64_t stream_key(std::string_view id);

/// mu + sigma * g with g drawn per (seed, sample id, epoch, i, j). Negative
/// draws are clamped to 0 and counted in *clamped.
NumArray sample_noisy_targets(const RolloutSample& sample, std::uint64_t seed, std::uint64_t epoch,
                              std::size_t* clamped = nullptr);

}  // namespace ionflux::data
