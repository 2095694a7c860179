#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ionflux/data/dataset.hpp"
#include "ionflux/model/model.hpp"
#include "ionflux/nn/adam.hpp"
#include "ionflux/nn/checkpoint.hpp"

namespace ionflux::model {

enum class Stage { Pretrain, Finetune };

std::string_view stage_name(Stage s);  // "pretrain", "finetune"

class StageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrainOptions {
  Stage stage = Stage::Pretrain;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  nn::AdamConfig adam;
  std::uint64_t seed = 0;  // shuffling and fine-tune noise draws
  std::size_t threads = 1;
  /// Fine-tune a store that was never pre-trained; every array trains.
  bool allow_npt = false;
  std::optional<ode::IntegratorConfig> integrator;  // tolerances used while training
};

struct EpochStats {
  std::size_t epoch = 0;
  double data_loss = 0.0;  // mean over samples, parameters as they were when each sample was seen
  double penalty = 0.0;    // soft penalty, unweighted
  double total = 0.0;      // data_loss + lambda * penalty (Soft mode)
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<EpochStats> history;
  std::vector<std::string> frozen;
  bool aborted = false;  // checkpoint holds the last parameters with finite loss
  std::string abort_reason;
  std::size_t clamped_targets = 0;
  /// Mean loss over the last quarter of epochs below that of the first quarter.
  bool loss_trend_decreasing = false;
};

/// Fresh store for a model, tagged with its architecture and seed.
nn::Checkpoint initial_checkpoint(const Model& model, std::uint64_t seed);

/// Whether the checkpoint lineage includes a pre-training stage.
bool is_pretrained(const nn::Checkpoint& ckpt);

/// Mini-batch Adam on per-sample losses. Pretrain fits stored concentrations;
/// finetune fits targets redrawn each epoch from the samples' noise scales and,
/// for a pre-trained store, freezes model.finetune_frozen(). Batch gradients
/// are summed in sample order, so thread count does not change results.
TrainResult train(const nn::Checkpoint& in, const std::vector<data::RolloutSample>& samples,
                  const TrainOptions& opts);

struct DatasetLoss {
  double data_loss = 0.0;
  double penalty = 0.0;
};

/// Mean per-sample loss against stored concentrations, in normalized units.
DatasetLoss dataset_loss(const Model& model, const nn::ParamStore& params,
                         const std::vector<data::RolloutSample>& samples, std::size_t threads = 1,
                         const std::optional<ode::IntegratorConfig>& integrator = std::nullopt);

}  // namespace ionflux::model
