#include "ionflux/model/odenet.hpp"

#include <stdexcept>

#include "ionflux/model/projection.hpp"

namespace ionflux::model {

namespace {

constexpr std::size_t kTokenFeatures = 6;

json integrator_json(const ode::IntegratorConfig& c) {
  return {{"rtol", c.rtol}, {"atol", c.atol}, {"max_steps", c.max_steps}};
}

ode::IntegratorConfig integrator_from(const json& j) {
  ode::IntegratorConfig c;
  c.rtol = j.value("rtol", c.rtol);
  c.atol = j.value("atol", c.atol);
  c.max_steps = j.value("max_steps", c.max_steps);
  return c;
}

}  // namespace

json ODENetConfig::to_json() const {
  return {{"family", "odenet"},
          {"d", data::kNumIons},
          {"d_k", d_k},
          {"hidden", hidden},
          {"attention", attention},
          {"constraint", constraint_name(constraint)},
          {"project_outputs", project_outputs},
          {"lambda", soft_weight},
          {"normalization", norm.to_json()},
          {"integrator", integrator_json(integrator)}};
}

ODENetConfig ODENetConfig::from_json(const json& j) {
  ODENetConfig c;
  c.d_k = j.value("d_k", c.d_k);
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.attention = j.value("attention", c.attention);
  c.constraint = parse_constraint(j.value("constraint", std::string("hard")));
  c.project_outputs = j.value("project_outputs", false);
  c.soft_weight = j.value("lambda", c.soft_weight);
  if (j.contains("normalization")) c.norm = Normalization::from_json(j.at("normalization"));
  if (j.contains("integrator")) c.integrator = integrator_from(j.at("integrator"));
  return c;
}

ODENet::ODENet(ODENetConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.d_k == 0) throw std::invalid_argument("ODENet: d_k must be positive");
  if (cfg_.hidden.size() != 4) throw std::invalid_argument("ODENet: the MLP has five layers (four hidden widths)");
  if (cfg_.soft_weight < 0.0) throw std::invalid_argument("ODENet: lambda must be >= 0");
}

std::vector<nn::ParamSpec> ODENet::param_specs() const {
  using nn::InitKind;
  const std::size_t d = data::kNumIons, k = cfg_.d_k;
  std::vector<nn::ParamSpec> s;
  s.push_back({"embed.weight", k, kTokenFeatures, kTokenFeatures});
  s.push_back({"embed.bias", 1, k, 1, InitKind::Zero, true});
  s.push_back({"pos", d, k, k});
  if (cfg_.attention) {
    for (const char* n : {"attn.w_q", "attn.w_k", "attn.w_v"}) s.push_back({n, k, k, k});
  }
  std::size_t in = d * k;
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t out = i < 4 ? cfg_.hidden[i] : d;
    const std::string name = "mlp" + std::to_string(i + 1);
    s.push_back({name + ".weight", out, in, in});
    s.push_back({name + ".bias", 1, out, 1, InitKind::Zero, true});
    in = out;
  }
  return s;
}

std::vector<std::string> ODENet::finetune_frozen() const {
  std::vector<std::string> names;
  for (const auto& s : param_specs()) {
    if (s.name.rfind("mlp4", 0) == 0 || s.name.rfind("mlp5", 0) == 0) continue;
    names.push_back(s.name);
  }
  return names;
}

json ODENet::architecture() const { return cfg_.to_json(); }

DynamicsContext ODENet::context(ad::Tape& tape, std::span<const Var> params,
                                const data::MixtureComposition& comp) const {
  const std::size_t expected = param_specs().size();
  if (params.size() != expected) {
    throw std::invalid_argument("ODENet: expected " + std::to_string(expected) + " parameter arrays, got " +
                                std::to_string(params.size()));
  }
  DynamicsContext ctx;
  ctx.mask = nn::TokenMask::from(presence(comp));
  if (ctx.mask.count() == 0) throw NoPresentIonsError("ODENet: every ion is absent");

  std::size_t i = 0;
  Var w = params[i++];
  Var b = params[i++];
  Var pos = params[i++];
  Var f = tape.constant(ion_features(comp, cfg_.norm));
  Var e = ad::add(ad::matmul(f, ad::slice(w, 1, 0, 4), true), b);
  ctx.base = nn::add_positional_encoding(e, pos, ctx.mask);
  ctx.w_state = ad::transpose(ad::slice(w, 1, 4, 5));
  ctx.w_flux = ad::transpose(ad::slice(w, 1, 5, 6));
  ctx.keep = tape.constant(ctx.mask.row_keep);
  if (cfg_.attention) {
    ctx.head = nn::AttentionHead{params[i], params[i + 1], params[i + 2], cfg_.d_k};
    i += 3;
  }
  for (std::size_t l = 0; l < 5; ++l, i += 2) ctx.mlp.push_back({params[i], params[i + 1]});
  if (cfg_.constraint == ConstraintMode::Hard && !cfg_.project_outputs) {
    ctx.projector = tape.constant(projector_matrix(valence_vector(), ctx.mask.present));
  }
  return ctx;
}

Var ODENet::dynamics(const DynamicsContext& ctx, Var u, double s, NumArray* weights) const {
  Var varying = ad::add(ad::mul(u, ctx.w_state), ad::scale(ctx.w_flux, s));
  Var tokens = ad::add(ctx.base, ad::mul(varying, ctx.keep));
  Var x = attend_and_flatten(tokens, ctx.mask, ctx.head ? &*ctx.head : nullptr, weights);
  Var out = ad::reshape(nn::mlp_forward(x, ctx.mlp), data::kNumIons, 1);
  if (ctx.projector.valid()) return ad::matmul(ctx.projector, out);
  return ad::mul(out, ctx.keep);
}

Forward ODENet::forward(ad::Tape& tape, std::span<const Var> params, const data::MixtureComposition& comp,
                        std::span<const double> flux, const ForwardOptions& opts) const {
  if (flux.empty()) throw std::invalid_argument("ODENet: no query fluxes");
  std::vector<double> s;
  s.reserve(flux.size() + 1);
  for (double j : flux) {
    if (!(j >= 0.0) || j > cfg_.norm.flux_scale * (1.0 + 1e-9)) {
      throw std::invalid_argument("ODENet: query flux " + std::to_string(j) + " m/s outside [0, " +
                                  std::to_string(cfg_.norm.flux_scale) + "]");
    }
    s.push_back(j / cfg_.norm.flux_scale);
  }
  const bool prepend = s.front() > 0.0;
  if (prepend) s.insert(s.begin(), 0.0);

  const DynamicsContext ctx = context(tape, params, comp);
  std::vector<double> u0 = normalized_feed(comp);
  if (cfg_.constraint == ConstraintMode::Hard) u0 = project_electroneutral(u0, valence_vector(), ctx.mask.present);

  const std::size_t d = data::kNumIons;
  const bool record = opts.record_attention && cfg_.attention;
  NumArray pending(d, d, 0.0), total(d, d, 0.0), w;
  std::size_t pending_n = 0, total_n = 0, evals = 0;
  auto f = [&](Var u, double t) {
    ++evals;
    Var out = dynamics(ctx, u, t, record ? &w : nullptr);
    if (record) {
      for (std::size_t q = 0; q < w.size(); ++q) pending[q] += w[q];
      ++pending_n;
    }
    return out;
  };
  ode::StepObserver observer;
  if (record) {
    observer = [&](bool accepted) {
      if (accepted) {
        for (std::size_t q = 0; q < total.size(); ++q) total[q] += pending[q];
        total_n += pending_n;
      }
      pending.fill(0.0);
      pending_n = 0;
    };
  }
  const auto traj = ode::integrate(f, tape.constant(NumArray(d, 1, u0)), s,
                                   opts.integrator.value_or(cfg_.integrator), observer);

  std::vector<Var> rows(traj.states.begin() + (prepend ? 1 : 0), traj.states.end());
  if (cfg_.constraint == ConstraintMode::Hard && cfg_.project_outputs) {
    Var p = tape.constant(projector_matrix(valence_vector(), ctx.mask.present));
    for (auto& r : rows) r = ad::matmul(p, r);
  }
  Forward out;
  out.states = stack_rows(rows);
  out.evaluations = evals;
  if (record && total_n > 0) {
    out.attention = total;
    for (auto& x : out.attention.values()) x /= static_cast<double>(total_n);
  }
  return out;
}

}  // namespace ionflux::model
