#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionflux/data/dataset.hpp"
#include "ionflux/data/noise.hpp"
#include "ionflux/dspm/solver.hpp"

namespace ionflux::bench {

/// Synthetic sim-to-"real" benchmark. Pretraining data comes from the
/// nominal membrane; fine-tune and test data from a shifted membrane, the
/// fine-tune part at a few random fluxes with noise scales attached.
struct BenchmarkConfig {
  std::uint64_t seed = 0;
  std::size_t compositions = 80;
  double test_fraction = 0.2;
  std::size_t grid_points = 11;  // uniform on [0, flux_max]
  double flux_max = 5e-5;        // m/s
  std::size_t finetune_compositions = 16;
  std::size_t finetune_points = 6;  // J_v = 0 plus random fluxes
  dspm::MembraneParams nominal{};
  dspm::MembraneParams shifted{0.516e-9, 1.0e-6, -80.0};
  data::NoiseModel noise;
  std::size_t threads = 1;

  nlohmann::json to_json() const;
  static BenchmarkConfig from_json(const nlohmann::json& j);
};

struct BenchmarkData {
  std::vector<data::RolloutSample> pretrain;  // SIMULATED, nominal membrane, train compositions
  std::vector<data::RolloutSample> finetune;  // PSEUDO_EXPERIMENTAL, sigma filled
  std::vector<data::RolloutSample> test;      // PSEUDO_EXPERIMENTAL noise-free truth, held-out compositions
  std::vector<std::string> failures;
};

BenchmarkData make_benchmark_data(const BenchmarkConfig& cfg);

std::vector<double> uniform_grid(std::size_t points, double max);

}  // namespace ionflux::bench
