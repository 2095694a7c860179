#include "ionflux/bench/baselines.hpp"

#include <cmath>
#include <limits>

#include "ionflux/model/odenet.hpp"
#include "ionflux/model/projection.hpp"

namespace ionflux::bench {

namespace {

using nn::InitKind;
using nn::ParamSpec;

constexpr std::size_t kFeatures = 4;
constexpr std::size_t kUnetInput = 2;  // channels fed to the first U-Net convolution

void add_linear(std::vector<ParamSpec>& s, const std::string& name, std::size_t out, std::size_t in) {
  s.push_back({name + ".weight", out, in, in});
  s.push_back({name + ".bias", 1, out, 1, InitKind::Zero, true});
}

// Convolution weights are out x (3 in): taps -1, 0, +1 side by side. Bias is a column.
void add_conv(std::vector<ParamSpec>& s, const std::string& name, std::size_t out, std::size_t in) {
  s.push_back({name + ".weight", out, 3 * in, 3 * in});
  s.push_back({name + ".bias", out, 1, 1, InitKind::Zero});
}

Var conv1d(Var x, Var w, Var b) {
  ad::Tape& tape = *x.tape();
  const std::size_t c = x.value().rows(), n = x.value().cols();
  Var zero = tape.constant(NumArray(c, 1, 0.0));
  Var padded = ad::concat(ad::concat(zero, x, 1), zero, 1);
  Var taps = ad::concat(ad::concat(ad::slice(padded, 1, 0, n), ad::slice(padded, 1, 1, n + 1), 0),
                        ad::slice(padded, 1, 2, n + 2), 0);
  return ad::add(ad::matmul(w, taps), b);
}

// n x n/2 pair averaging and n/2 x n nearest-neighbour upsampling.
NumArray pool_matrix(std::size_t n) {
  NumArray p(n, n / 2, 0.0);
  for (std::size_t i = 0; i < n / 2; ++i) p(2 * i, i) = p(2 * i + 1, i) = 0.5;
  return p;
}

NumArray upsample_matrix(std::size_t m) {
  NumArray u(m, 2 * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) u(i, 2 * i) = u(i, 2 * i + 1) = 1.0;
  return u;
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::ODENet: return "odenet";
    case Family::Mlp: return "mlp";
    case Family::Conv: return "conv";
    case Family::Unet: return "unet";
  }
  return "odenet";
}

Family parse_family(std::string_view name) {
  if (name == "odenet") return Family::ODENet;
  if (name == "mlp") return Family::Mlp;
  if (name == "conv") return Family::Conv;
  if (name == "unet") return Family::Unet;
  throw std::invalid_argument("unknown model family '" + std::string(name) + "' (odenet, mlp, conv, unet)");
}

json BaselineConfig::to_json() const {
  return {{"family", family_name(family)},
          {"d", data::kNumIons},
          {"d_k", d_k},
          {"attention", attention},
          {"constraint", model::constraint_name(constraint)},
          {"lambda", soft_weight},
          {"width", width},
          {"grid", grid},
          {"normalization", norm.to_json()}};
}

BaselineConfig BaselineConfig::from_json(const json& j) {
  BaselineConfig c;
  c.family = parse_family(j.at("family").get<std::string>());
  c.d_k = j.value("d_k", c.d_k);
  c.attention = j.value("attention", c.attention);
  c.constraint = model::parse_constraint(j.value("constraint", std::string("hard")));
  c.soft_weight = j.value("lambda", c.soft_weight);
  c.width = j.value("width", c.width);
  c.grid = j.value("grid", c.grid);
  if (j.contains("normalization")) c.norm = model::Normalization::from_json(j.at("normalization"));
  return c;
}

Baseline::Baseline(BaselineConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.family == Family::ODENet) throw std::invalid_argument("Baseline: use model::ODENet for the odenet family");
  if (cfg_.width == 0 || cfg_.d_k == 0) throw std::invalid_argument("Baseline: widths must be positive");
  if (cfg_.family == Family::Unet && cfg_.grid % 4 != 0) {
    throw std::invalid_argument("Baseline: U-Net grid must be divisible by 4");
  }
  if (cfg_.grid < 2) throw std::invalid_argument("Baseline: grid needs at least 2 points");
  if (cfg_.soft_weight < 0.0) throw std::invalid_argument("Baseline: lambda must be >= 0");
}

std::vector<ParamSpec> Baseline::param_specs() const {
  const std::size_t d = data::kNumIons, k = cfg_.d_k, w = cfg_.width, n = cfg_.grid;
  std::vector<ParamSpec> s;
  add_linear(s, "embed", k, kFeatures);
  s.push_back({"pos", d, k, k});
  if (cfg_.attention) {
    for (const char* name : {"attn.w_q", "attn.w_k", "attn.w_v"}) s.push_back({name, k, k, k});
  }
  const std::size_t flat = d * k;
  switch (cfg_.family) {
    case Family::Mlp:
      add_linear(s, "mlp1", w, flat + 1);
      add_linear(s, "mlp2", w, w);
      add_linear(s, "mlp3", w, w);
      add_linear(s, "mlp4", w, w);
      add_linear(s, "mlp5", d, w);
      break;
    case Family::Conv:
      add_linear(s, "lin", w * n, flat);
      add_conv(s, "conv1", w, w);
      add_conv(s, "conv2", w, w);
      add_conv(s, "conv3", w, w);
      add_conv(s, "conv_out", d, w);
      break;
    case Family::Unet:
      add_linear(s, "lin", kUnetInput * n, flat);
      add_conv(s, "enc1", w, kUnetInput);
      add_conv(s, "enc2", 2 * w, w);
      add_conv(s, "bottleneck", 2 * w, 2 * w);
      add_conv(s, "dec1", w, 4 * w);
      add_conv(s, "conv_out", d, 2 * w);
      break;
    case Family::ODENet:
      break;
  }
  return s;
}

std::vector<std::string> Baseline::finetune_frozen() const {
  std::vector<std::string> keep_training;
  switch (cfg_.family) {
    case Family::Mlp: keep_training = {"mlp4", "mlp5"}; break;
    case Family::Conv: keep_training = {"conv3", "conv_out"}; break;
    case Family::Unet: keep_training = {"dec1", "conv_out"}; break;
    case Family::ODENet: break;
  }
  std::vector<std::string> frozen;
  for (const auto& s : param_specs()) {
    bool trains = false;
    for (const auto& p : keep_training) trains = trains || s.name.rfind(p + ".", 0) == 0;
    if (!trains) frozen.push_back(s.name);
  }
  return frozen;
}

Var Baseline::encode(ad::Tape& tape, std::span<const Var> params, const data::MixtureComposition& comp,
                     std::size_t& next, NumArray* weights) const {
  const std::size_t expected = param_specs().size();
  if (params.size() != expected) {
    throw std::invalid_argument("Baseline: expected " + std::to_string(expected) + " parameter arrays, got " +
                                std::to_string(params.size()));
  }
  const auto mask = nn::TokenMask::from(model::presence(comp));
  if (mask.count() == 0) throw model::NoPresentIonsError("Baseline: every ion is absent");
  Var f = tape.constant(model::ion_features(comp, cfg_.norm));
  Var e = nn::linear(f, {params[0], params[1]});
  Var tokens = nn::add_positional_encoding(e, params[2], mask);
  next = 3;
  std::optional<nn::AttentionHead> head;
  if (cfg_.attention) {
    head = nn::AttentionHead{params[3], params[4], params[5], cfg_.d_k};
    next = 6;
  }
  return model::attend_and_flatten(tokens, mask, head ? &*head : nullptr, weights);
}

Var Baseline::grid_output(ad::Tape& tape, std::span<const Var> params, const data::MixtureComposition& comp) const {
  if (cfg_.family == Family::Mlp) throw std::invalid_argument("Baseline: the MLP has no flux grid");
  std::size_t i = 0;
  Var enc = encode(tape, params, comp, i, nullptr);
  const std::size_t n = cfg_.grid;
  auto layer = [&](Var x) {
    Var y = conv1d(x, params[i], params[i + 1]);
    i += 2;
    return y;
  };
  if (cfg_.family == Family::Conv) {
    Var x = ad::tanh(ad::reshape(nn::linear(enc, {params[i], params[i + 1]}), cfg_.width, n));
    i += 2;
    x = ad::tanh(layer(x));
    x = ad::tanh(layer(x));
    x = ad::tanh(layer(x));
    return layer(x);
  }
  Var x = ad::tanh(ad::reshape(nn::linear(enc, {params[i], params[i + 1]}), kUnetInput, n));
  i += 2;
  Var e1 = ad::tanh(layer(x));
  Var e2 = ad::tanh(layer(ad::matmul(e1, tape.constant(pool_matrix(n)))));
  Var b = ad::tanh(layer(ad::matmul(e2, tape.constant(pool_matrix(n / 2)))));
  Var d1 = ad::tanh(layer(ad::concat(ad::matmul(b, tape.constant(upsample_matrix(n / 4))), e2, 0)));
  return layer(ad::concat(ad::matmul(d1, tape.constant(upsample_matrix(n / 2))), e1, 0));
}

model::Forward Baseline::forward(ad::Tape& tape, std::span<const Var> params, const data::MixtureComposition& comp,
                                 std::span<const double> flux, const model::ForwardOptions& opts) const {
  if (flux.empty()) throw std::invalid_argument("Baseline: no query fluxes");
  std::vector<double> s;
  for (double j : flux) {
    if (!(j >= 0.0) || j > cfg_.norm.flux_scale * (1.0 + 1e-9)) {
      throw std::invalid_argument("Baseline: query flux " + std::to_string(j) + " m/s outside [0, " +
                                  std::to_string(cfg_.norm.flux_scale) + "]");
    }
    s.push_back(std::min(1.0, j / cfg_.norm.flux_scale));
  }
  const std::size_t k = s.size(), d = data::kNumIons;
  model::Forward out;
  Var raw;
  if (cfg_.family == Family::Mlp) {
    std::size_t i = 0;
    NumArray w;
    Var enc = encode(tape, params, comp, i, opts.record_attention && cfg_.attention ? &w : nullptr);
    if (!w.empty()) out.attention = w;
    Var x = ad::concat(ad::matmul(tape.constant(NumArray(k, 1, 1.0)), enc), tape.constant(NumArray(k, 1, s)), 1);
    std::vector<nn::LinearLayer> layers;
    for (std::size_t l = 0; l < 5; ++l, i += 2) layers.push_back({params[i], params[i + 1]});
    raw = nn::mlp_forward(x, layers);
  } else {
    if (opts.record_attention && cfg_.attention) {
      ad::Tape scratch;
      std::vector<Var> copies;
      for (Var p : params) copies.push_back(scratch.constant(p.value()));
      std::size_t i = 0;
      NumArray w;
      encode(scratch, copies, comp, i, &w);
      out.attention = w;
    }
    Var g = grid_output(tape, params, comp);  // d x n
    raw = ad::matmul(tape.constant(interpolation_matrix(s, cfg_.grid)), ad::transpose(g));
  }
  const auto mask = model::presence(comp);
  Var pred = ad::add(raw, tape.constant(NumArray(1, d, model::normalized_feed(comp))));
  if (cfg_.constraint == ConstraintMode::Hard) {
    pred = ad::matmul(pred, tape.constant(model::projector_matrix(model::valence_vector(), mask)));
  } else {
    NumArray keep(1, d, 0.0);
    for (std::size_t j = 0; j < d; ++j) keep[j] = mask[j] ? 1.0 : 0.0;
    pred = ad::mul(pred, tape.constant(keep));
  }
  out.states = pred;
  out.evaluations = 1;
  return out;
}

std::size_t baseline_param_count(const BaselineConfig& cfg) {
  std::size_t n = 0;
  for (const auto& s : Baseline(cfg).param_specs()) n += s.rows * s.cols;
  return n;
}

std::size_t odenet_param_count(bool attention) {
  model::ODENetConfig c;
  c.attention = attention;
  std::size_t n = 0;
  for (const auto& s : model::ODENet(c).param_specs()) n += s.rows * s.cols;
  return n;
}

std::size_t solve_width(BaselineConfig cfg, std::size_t target, double tolerance) {
  std::size_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t w = 1; w <= 256; ++w) {
    cfg.width = w;
    const double gap = std::abs(static_cast<double>(baseline_param_count(cfg)) - static_cast<double>(target));
    if (gap < best_gap) {
      best_gap = gap;
      best = w;
    }
  }
  if (best_gap > tolerance * static_cast<double>(target)) {
    throw ParameterBudgetError(std::string(family_name(cfg.family)) + ": no width within " +
                               std::to_string(tolerance * 100.0) + "% of " + std::to_string(target) + " parameters");
  }
  return best;
}

Baseline build_baseline(Family family, bool attention, ConstraintMode constraint, double soft_weight,
                        double tolerance) {
  BaselineConfig cfg;
  cfg.family = family;
  cfg.attention = attention;
  cfg.constraint = constraint;
  cfg.soft_weight = soft_weight;
  cfg.width = solve_width(cfg, odenet_param_count(attention), tolerance);
  return Baseline(cfg);
}

NumArray interpolation_matrix(std::span<const double> s, std::size_t n) {
  NumArray q(s.size(), n, 0.0);
  const double step = static_cast<double>(n - 1);
  for (std::size_t r = 0; r < s.size(); ++r) {
    const double x = std::clamp(s[r], 0.0, 1.0) * step;
    const std::size_t lo = std::min(static_cast<std::size_t>(x), n - 2);
    const double frac = x - static_cast<double>(lo);
    q(r, lo) = 1.0 - frac;
    q(r, lo + 1) = frac;
  }
  return q;
}

}  // namespace ionflux::bench
