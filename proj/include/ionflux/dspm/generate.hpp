#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ionflux/data/dataset.hpp"
#include "ionflux/data/noise.hpp"
#include "ionflux/dspm/solver.hpp"

namespace ionflux::dspm {

struct SampleRequest {
  std::string id;
  data::MixtureComposition composition;
  std::vector<double> flux;  // ascending, m/s
};

struct GenerateOptions {
  data::Provenance provenance = data::Provenance::Simulated;
  bool noise = false;  // fill sigma from the noise model
  data::NoiseModel noise_model;
  std::size_t threads = 1;
};

struct GenerateResult {
  std::vector<data::RolloutSample> samples;  // request order, failures dropped
  std::vector<std::string> failures;         // one message per skipped sample
};

/// One solve per (composition, flux), warm-started along each flux grid.
GenerateResult generate_dataset(const std::vector<SampleRequest>& requests, const MembraneParams& membrane,
                                const SolverConfig& cfg = {}, const GenerateOptions& opts = {});

}  // namespace ionflux::dspm
