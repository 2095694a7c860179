#include "ionflux/model/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "ionflux/data/ions.hpp"

namespace ionflux::model {

std::string_view constraint_name(ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::Hard: return "hard";
    case ConstraintMode::Soft: return "soft";
    case ConstraintMode::None: return "none";
  }
  return "none";
}

ConstraintMode parse_constraint(std::string_view name) {
  if (name == "hard") return ConstraintMode::Hard;
  if (name == "soft") return ConstraintMode::Soft;
  if (name == "none") return ConstraintMode::None;
  throw std::invalid_argument("unknown constraint mode '" + std::string(name) + "' (hard, soft, none)");
}

double Normalization::radius() const {
  if (radius_scale > 0.0) return radius_scale;
  double m = 0.0;
  for (const auto& ion : data::ion_table()) m = std::max(m, ion.stokes_radius);
  return m;
}

double Normalization::diffusivity() const {
  if (diffusivity_scale > 0.0) return diffusivity_scale;
  double m = 0.0;
  for (const auto& ion : data::ion_table()) m = std::max(m, ion.diffusivity);
  return m;
}

json Normalization::to_json() const {
  return {{"flux_scale", flux_scale},
          {"radius_scale", radius()},
          {"diffusivity_scale", diffusivity()},
          {"concentration_scale", "max_feed"}};
}

Normalization Normalization::from_json(const json& j) {
  Normalization n;
  n.flux_scale = j.value("flux_scale", n.flux_scale);
  n.radius_scale = j.value("radius_scale", 0.0);
  n.diffusivity_scale = j.value("diffusivity_scale", 0.0);
  return n;
}

std::vector<double> normalized_feed(const data::MixtureComposition& comp) {
  const double cmax = comp.max_concentration();
  if (!(cmax > 0.0)) throw std::invalid_argument("composition has no present ions");
  std::vector<double> u(data::kNumIons, 0.0);
  for (std::size_t j = 0; j < data::kNumIons; ++j)
    if (comp.present[j]) u[j] = comp.c_in[j] / cmax;
  return u;
}

NumArray ion_features(const data::MixtureComposition& comp, const Normalization& norm) {
  const auto u = normalized_feed(comp);
  const auto& table = data::ion_table();
  const double rs = norm.radius(), ds = norm.diffusivity();
  NumArray f(data::kNumIons, 4, 0.0);
  for (std::size_t j = 0; j < data::kNumIons; ++j) {
    if (!comp.present[j]) continue;
    f(j, 0) = u[j];
    f(j, 1) = table[j].valence;
    f(j, 2) = table[j].stokes_radius / rs;
    f(j, 3) = table[j].diffusivity / ds;
  }
  return f;
}

std::vector<double> valence_vector() {
  std::vector<double> z;
  for (const auto& ion : data::ion_table()) z.push_back(ion.valence);
  return z;
}

std::vector<bool> presence(const data::MixtureComposition& comp) {
  return std::vector<bool>(comp.present.begin(), comp.present.end());
}

nn::ParamStore Model::init(std::uint64_t seed) const {
  const auto specs = param_specs();
  return nn::init_params(specs, seed);
}

Var attend_and_flatten(Var tokens, const nn::TokenMask& mask, const nn::AttentionHead* head, NumArray* weights) {
  Var x = tokens;
  if (head) {
    auto a = nn::attention(tokens, mask, *head);
    if (weights) *weights = a.weights.value();
    x = ad::add(tokens, a.output);
  }
  const NumArray& v = x.value();
  return ad::reshape(x, 1, v.rows() * v.cols());
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: nothing to stack");
  auto as_row = [](Var v) {
    const NumArray& a = v.value();
    return a.rows() == 1 ? v : ad::reshape(v, 1, a.size());
  };
  Var out = as_row(rows[0]);
  for (std::size_t i = 1; i < rows.size(); ++i) out = ad::concat(out, as_row(rows[i]), 0);
  return out;
}

}  // namespace ionflux::model
