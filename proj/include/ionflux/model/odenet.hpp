#pragma once

#include <cstddef>
#include <vector>

#include "ionflux/model/model.hpp"

namespace ionflux::model {

struct ODENetConfig {
  std::size_t d_k = 8;
  std::vector<std::size_t> hidden{32, 32, 32, 32};  // MLP layers 1-4; layer 5 maps to d
  bool attention = true;
  ConstraintMode constraint = ConstraintMode::Hard;
  bool project_outputs = false;  // Hard mode projects states instead of the derivative
  double soft_weight = 1.0;
  Normalization norm;
  ode::IntegratorConfig integrator;

  json to_json() const;
  static ODENetConfig from_json(const json& j);
};

/// Per-rollout constants on the tape.
struct DynamicsContext {
  nn::TokenMask mask;
  Var base;         // d x d_k: embedded constant features + positional table, masked
  Var w_state;      // 1 x d_k embedding column for the state feature
  Var w_flux;       // 1 x d_k embedding column for the flux feature
  Var keep;         // d x 1 presence
  Var projector;    // d x d, Hard mode on the derivative only
  std::optional<nn::AttentionHead> head;
  std::vector<nn::LinearLayer> mlp;
};

/// Attention-enhanced neural ODE over normalized flux s = J_v / flux_scale.
/// State u = h / max feed, a d x 1 column.
class ODENet : public Model {
 public:
  explicit ODENet(ODENetConfig cfg = {});

  std::string family() const override { return "odenet"; }
  std::vector<nn::ParamSpec> param_specs() const override;
  std::vector<std::string> finetune_frozen() const override;
  json architecture() const override;
  ConstraintMode constraint() const override { return cfg_.constraint; }
  double soft_weight() const override { return cfg_.soft_weight; }
  const Normalization& normalization() const override { return cfg_.norm; }
  const ODENetConfig& config() const { return cfg_; }

  DynamicsContext context(ad::Tape& tape, std::span<const Var> params, const data::MixtureComposition& comp) const;
  /// du/ds. Tokens per ion are [feed, z, radius, diffusivity, u_j, s]; absent
  /// components of the result are zero.
  Var dynamics(const DynamicsContext& ctx, Var u, double s, NumArray* weights = nullptr) const;

  Forward forward(ad::Tape& tape, std::span<const Var> params, const data::MixtureComposition& comp,
                  std::span<const double> flux, const ForwardOptions& opts = {}) const override;

 private:
  ODENetConfig cfg_;
};

}  // namespace ionflux::model
