#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ionflux/ad/tape.hpp"
#include "ionflux/data/composition.hpp"
#include "ionflux/nn/layers.hpp"
#include "ionflux/nn/param_store.hpp"
#include "ionflux/ode/tsit5.hpp"

namespace ionflux::model {

using ad::NumArray;
using ad::Var;
using nlohmann::json;

enum class ConstraintMode { Hard, Soft, None };

std::string_view constraint_name(ConstraintMode mode);  // "hard", "soft", "none"
ConstraintMode parse_constraint(std::string_view name);

/// Feature scales shared by every model family.
struct Normalization {
  double flux_scale = 5e-5;  // m/s, flux range of the benchmark
  double radius_scale = 0.0;       // <= 0: largest Stokes radius in the vocabulary
  double diffusivity_scale = 0.0;  // <= 0: largest diffusivity in the vocabulary

  double radius() const;
  double diffusivity() const;
  json to_json() const;
  static Normalization from_json(const json& j);
};

/// d x 4 constant ion features: feed / max feed, valence, radius and
/// diffusivity over their scales. Absent rows are zero.
NumArray ion_features(const data::MixtureComposition& comp, const Normalization& norm);

/// Feed concentrations divided by the largest feed concentration.
std::vector<double> normalized_feed(const data::MixtureComposition& comp);

std::vector<double> valence_vector();

std::vector<bool> presence(const data::MixtureComposition& comp);

struct ForwardOptions {
  bool record_attention = false;
  std::optional<ode::IntegratorConfig> integrator;  // replaces the model's own tolerances
};

struct Forward {
  Var states;           // k x d concentrations over the largest feed concentration
  NumArray attention;   // d x d mean weights, empty without attention
  std::size_t evaluations = 0;
};

/// A trainable map from (composition, flux list) to permeate concentrations.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string family() const = 0;
  virtual std::vector<nn::ParamSpec> param_specs() const = 0;
  /// Arrays held fixed when fine-tuning a pre-trained store.
  virtual std::vector<std::string> finetune_frozen() const = 0;
  virtual json architecture() const = 0;
  virtual ConstraintMode constraint() const = 0;
  virtual double soft_weight() const = 0;
  virtual const Normalization& normalization() const = 0;

  /// params are bound in param_specs() order. flux in m/s, ascending.
  virtual Forward forward(ad::Tape& tape, std::span<const Var> params, const data::MixtureComposition& comp,
                          std::span<const double> flux, const ForwardOptions& opts = {}) const = 0;

  nn::ParamStore init(std::uint64_t seed) const;
};

/// Rebuilds a model from architecture(); dispatches on "family".
std::unique_ptr<Model> make_model(const json& architecture);

/// Masked d x width tokens (positional table already added) -> optional
/// residual attention -> 1 x (d * width). weights, if given, receives the
/// attention matrix.
Var attend_and_flatten(Var tokens, const nn::TokenMask& mask, const nn::AttentionHead* head, NumArray* weights);

/// Stacks 1 x d or d x 1 states into a k x d matrix.
Var stack_rows(std::span<const Var> rows);

}  // namespace ionflux::model
