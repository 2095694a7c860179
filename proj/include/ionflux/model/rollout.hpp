#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ionflux/data/composition.hpp"
#include "ionflux/model/model.hpp"
#include "ionflux/nn/checkpoint.hpp"

namespace ionflux::model {

struct RolloutPrediction {
  std::string sample_id;
  data::MixtureComposition composition;
  std::vector<double> flux;  // m/s
  NumArray conc;             // #flux x d, mol/m^3
  NumArray rejection;        // #flux x d, 0 for absent ions
  NumArray attention;        // d x d mean weights over accepted steps, empty without attention
  std::size_t evaluations = 0;

  /// max over queries of |sum z_j h_j| / ||h||_1.
  double max_charge_violation() const;
};

/// Binds every array as a tape constant.
std::vector<Var> bind_constants(ad::Tape& tape, const nn::ParamStore& params);

RolloutPrediction rollout(const Model& model, const nn::ParamStore& params, const data::MixtureComposition& comp,
                          std::span<const double> flux, const std::string& sample_id = "");
RolloutPrediction rollout(const data::MixtureComposition& comp, std::span<const double> flux,
                          const nn::Checkpoint& ckpt, const std::string& sample_id = "");

/// Columns sample_id, ion, J_v, c_pred, rejection_pred; present ions only.
void write_rollout_csv(const std::filesystem::path& path, const std::vector<RolloutPrediction>& preds);
/// {"ions": [...], "attention": {sample_id: d x d}} for predictions with attention.
void write_attention_json(const std::filesystem::path& path, const std::vector<RolloutPrediction>& preds);

}  // namespace ionflux::model
