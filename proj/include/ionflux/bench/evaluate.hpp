#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "ionflux/data/dataset.hpp"
#include "ionflux/dspm/solver.hpp"
#include "ionflux/model/model.hpp"
#include "ionflux/nn/param_store.hpp"

namespace ionflux::bench {

using ad::NumArray;

struct ParityPoint {
  std::string sample_id;
  std::size_t ion = 0;
  double flux = 0.0;
  double c_true = 0.0;
  double c_pred = 0.0;
  double r_true = 0.0;
  double r_pred = 0.0;
};

struct EvalMetrics {
  double mse = 0.0;            // mean per-sample masked MSE of concentrations over max feed
  double band_fraction = 0.0;  // share of points with |c_pred - c_true| <= 0.1 |c_true|
  double max_violation = 0.0;  // max |sum z c| / ||c||_1 over predicted points
  std::array<double, data::kNumIons> rejection_mae{};  // per ion, over samples containing it
  std::vector<ParityPoint> parity;
};

/// Metrics for predicted concentrations (mol/m^3, one array per test sample
/// shaped like its conc) against the test samples.
EvalMetrics score_predictions(const std::vector<data::RolloutSample>& test, const std::vector<NumArray>& predicted);

EvalMetrics evaluate(const model::Model& model, const nn::ParamStore& params,
                     const std::vector<data::RolloutSample>& test, std::size_t threads = 1);

/// The pore model itself as a predictor, run with the given membrane.
EvalMetrics evaluate_dspm(const std::vector<data::RolloutSample>& test, const dspm::MembraneParams& membrane,
                          std::size_t threads = 1);

/// sample_id,ion,J_v,c_true,c_pred,rejection_true,rejection_pred
void write_parity_csv(const std::filesystem::path& path, const EvalMetrics& m);

}  // namespace ionflux::bench
