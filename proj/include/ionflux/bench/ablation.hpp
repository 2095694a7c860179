#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ionflux/bench/baselines.hpp"
#include "ionflux/bench/benchmark.hpp"
#include "ionflux/model/train.hpp"

namespace ionflux::bench {

struct AblationConfig {
  std::vector<Family> families{Family::ODENet, Family::Mlp, Family::Conv, Family::Unet};
  std::vector<bool> attention{true, false};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t pretrain_epochs = 200;
  std::size_t finetune_epochs = 200;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double lambda = 1.0;
  double param_tolerance = 0.1;
  double train_rtol = 1e-4;  // integrator tolerance while training; evaluation uses the model default
  std::size_t threads = 1;   // cells run in parallel, each single-threaded

  nlohmann::json to_json() const;
  static AblationConfig from_json(const nlohmann::json& j);
};

struct AblationCell {
  Family family = Family::ODENet;
  bool attention = true;
  bool pretrained = true;
  ConstraintMode constraint = ConstraintMode::Hard;
  std::uint64_t seed = 0;
  std::size_t params = 0;
  double test_mse = 0.0;
  double violation = 0.0;  // max relative charge imbalance of test predictions
  std::size_t pretrain_epochs_run = 0;
  std::size_t finetune_epochs_run = 0;
  double finetune_loss = 0.0;  // last epoch, data part
  std::string error;
  double seconds = 0.0;
};

struct AblationRow {
  Family family = Family::ODENet;
  bool attention = true;
  bool pretrained = true;
  ConstraintMode constraint = ConstraintMode::Hard;
  std::size_t params = 0;
  std::size_t runs = 0;  // successful seeds
  double mse_mean = 0.0;
  double mse_std = 0.0;  // sample standard deviation
  double violation_max = 0.0;
  double violation_min = 0.0;
};

struct AblationResult {
  std::vector<AblationCell> cells;  // family, attention, PT/NPT, HIB/SIB, seed order
  std::vector<AblationRow> rows;
  double seconds = 0.0;

  /// Row for a configuration, nullptr if absent.
  const AblationRow* find(Family f, bool attention, bool pretrained, ConstraintMode c) const;
  /// Successful cell for a configuration and seed, nullptr otherwise.
  const AblationCell* cell(Family f, bool attention, bool pretrained, ConstraintMode c, std::uint64_t seed) const;
};

/// Model for one grid cell; baselines are width-matched to the ODENet with the
/// same attention flag and must land within tolerance of it.
std::unique_ptr<model::Model> make_cell_model(Family family, bool attention, ConstraintMode constraint,
                                              double lambda, double tolerance = 0.1);

/// Every family x attention x {PT, NPT} x {HIB, SIB} x seed cell: optional
/// pretraining, fine-tuning, test evaluation. Cell failures are recorded.
AblationResult run_ablation(const AblationConfig& cfg, const BenchmarkData& data);

/// Per-cell table (no timings) and per-configuration summary.
void write_ablation_cells_csv(const std::filesystem::path& path, const AblationResult& r);
void write_ablation_summary_csv(const std::filesystem::path& path, const AblationResult& r);

}  // namespace ionflux::bench
