#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ionflux/model/model.hpp"

namespace ionflux::bench {

using model::ConstraintMode;
using model::json;
using model::Var;
using ad::NumArray;

enum class Family { ODENet, Mlp, Conv, Unet };

std::string_view family_name(Family f);  // "odenet", "mlp", "conv", "unet"
Family parse_family(std::string_view name);

class ParameterBudgetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BaselineConfig {
  Family family = Family::Mlp;
  bool attention = true;
  ConstraintMode constraint = ConstraintMode::Hard;
  double soft_weight = 1.0;
  std::size_t width = 32;  // MLP hidden width; CONV/UNET channel count
  std::size_t grid = 16;   // flux grid of CONV/UNET
  std::size_t d_k = 8;
  model::Normalization norm;

  json to_json() const;
  static BaselineConfig from_json(const json& j);
};

/// Feed-forward, convolutional and U-Net comparators sharing one ion encoder
/// (features [feed, z, radius, diffusivity] -> embedding -> positional table
/// -> optional residual attention -> flatten). Predictions are the normalized
/// feed plus a learned correction, masked, and in Hard mode projected per
/// flux point.
///
/// MLP: [encoding, s] -> 5 layers -> d at every query.
/// CONV: linear to width x grid, three k=3 convolutions, output convolution to
/// d channels, linear interpolation from the grid to the queries.
/// UNET: linear to 2 x grid, two pooling levels (width, 2 width channels),
/// bottleneck, upsampling with skip connections, output convolution.
class Baseline : public model::Model {
 public:
  explicit Baseline(BaselineConfig cfg);

  std::string family() const override { return std::string(family_name(cfg_.family)); }
  std::vector<nn::ParamSpec> param_specs() const override;
  std::vector<std::string> finetune_frozen() const override;
  json architecture() const override { return cfg_.to_json(); }
  ConstraintMode constraint() const override { return cfg_.constraint; }
  double soft_weight() const override { return cfg_.soft_weight; }
  const model::Normalization& normalization() const override { return cfg_.norm; }
  const BaselineConfig& config() const { return cfg_; }

  /// CONV/UNET raw decoder output on the flux grid, d x grid.
  Var grid_output(ad::Tape& tape, std::span<const Var> params, const data::MixtureComposition& comp) const;

  model::Forward forward(ad::Tape& tape, std::span<const Var> params, const data::MixtureComposition& comp,
                         std::span<const double> flux, const model::ForwardOptions& opts = {}) const override;

 private:
  Var encode(ad::Tape& tape, std::span<const Var> params, const data::MixtureComposition& comp,
             std::size_t& next, NumArray* weights) const;
  BaselineConfig cfg_;
};

/// Parameter count of a family at a given width, without building it.
std::size_t baseline_param_count(const BaselineConfig& cfg);

/// Parameter count of the default ODENet with or without attention.
std::size_t odenet_param_count(bool attention);

/// Width whose count is closest to target; throws ParameterBudgetError if
/// that count is outside target * (1 +- tolerance).
std::size_t solve_width(BaselineConfig cfg, std::size_t target, double tolerance = 0.1);

/// Baseline with width matched to the ODENet with the same attention flag.
Baseline build_baseline(Family family, bool attention, ConstraintMode constraint, double soft_weight = 1.0,
                        double tolerance = 0.1);

/// k x n linear interpolation weights from a uniform grid on [0, 1].
NumArray interpolation_matrix(std::span<const double> s, std::size_t n);

}  // namespace ionflux::bench
