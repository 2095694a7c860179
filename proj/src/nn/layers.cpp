#include "ionflux/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ionflux::nn {

TokenMask TokenMask::from(std::vector<bool> present) {
  TokenMask m;
  const std::size_t d = present.size();
  m.row_keep = NumArray(d, 1, 0.0);
  m.col_keep = NumArray(1, d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    m.row_keep[i] = present[i] ? 1.0 : 0.0;
    m.col_keep[i] = present[i] ? 1.0 : 0.0;
  }
  m.present = std::move(present);
  return m;
}

TokenMask TokenMask::all(std::size_t d) { return from(std::vector<bool>(d, true)); }

std::size_t TokenMask::count() const {
  return static_cast<std::size_t>(std::count(present.begin(), present.end(), true));
}

Var linear(Var x, const LinearLayer& layer) {
  const NumArray& w = layer.weight.value();
  if (x.value().cols() != w.cols()) {
    throw ad::ShapeError("linear: input width " + std::to_string(x.value().cols()) +
                         " does not match weight " + w.shape_string());
  }
  return ad::add(ad::matmul(x, layer.weight, true), layer.bias);
}

Var mlp_forward(Var x, std::span<const LinearLayer> layers) {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = linear(h, layers[i]);
    if (i + 1 < layers.size()) h = ad::tanh(h);
  }
  return h;
}

AttentionResult attention(Var tokens, const TokenMask& mask, const AttentionHead& head) {
  if (mask.count() == 0) throw std::invalid_argument("attention: every token is masked");
  if (tokens.value().rows() != mask.size()) {
    throw ad::ShapeError("attention: " + std::to_string(tokens.value().rows()) +
                         " tokens but mask of length " + std::to_string(mask.size()));
  }
  ad::Tape& tape = *tokens.tape();
  Var q = ad::matmul(tokens, head.w_q);
  Var k = ad::matmul(tokens, head.w_k);
  Var v = ad::matmul(tokens, head.w_v);
  Var scores = ad::scale(ad::matmul(q, k, true), 1.0 / std::sqrt(static_cast<double>(head.d_k)));
  scores = ad::masked_fill(scores, mask.col_keep);
  Var weights = ad::mul(ad::softmax(scores), tape.constant(mask.row_keep));
  return {ad::matmul(weights, v), weights};
}

Var add_positional_encoding(Var tokens, Var table, const TokenMask& mask) {
  return ad::mul(ad::add(tokens, table), tokens.tape()->constant(mask.row_keep));
}

ParamStore init_params(std::span<const ParamSpec> specs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore store;
  for (const auto& s : specs) {
    std::vector<double> data(s.rows * s.cols, 0.0);
    if (s.init == InitKind::Weight) {
      const double bound = std::sqrt(1.0 / static_cast<double>(std::max<std::size_t>(s.fan_in, 1)));
      for (auto& x : data) x = (2.0 * unit_uniform(rng()) - 1.0) * bound;
    }
    if (s.vector) {
      store.add(s.name, NumArray(std::move(data)));
    } else {
      store.add(s.name, NumArray(s.rows, s.cols, std::move(data)));
    }
  }
  return store;
}

}  // namespace ionflux::nn
