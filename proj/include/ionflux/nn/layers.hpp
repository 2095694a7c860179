#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ionflux/ad/tape.hpp"
#include "ionflux/nn/param_store.hpp"

namespace ionflux::nn {

using ad::Var;

/// Presence mask over tokens with the broadcastable keep-arrays the
/// attention kernels need.
struct TokenMask {
  std::vector<bool> present;
  NumArray row_keep;  // d x 1
  NumArray col_keep;  // 1 x d

  static TokenMask from(std::vector<bool> present);
  static TokenMask all(std::size_t d);
  std::size_t size() const { return present.size(); }
  std::size_t count() const;
};

/// Tape view of a linear layer: weight is out x in, bias has length out.
struct LinearLayer {
  Var weight;
  Var bias;
};

/// x (rows x in) -> x W^T + b (rows x out).
Var linear(Var x, const LinearLayer& layer);

/// tanh after every layer except the last, whose output is returned raw.
Var mlp_forward(Var x, std::span<const LinearLayer> layers);

/// Projections are feature-width x d_k.
struct AttentionHead {
  Var w_q;
  Var w_k;
  Var w_v;
  std::size_t d_k = 8;
};

struct AttentionResult {
  Var output;   // d x d_k, zero rows for absent tokens
  Var weights;  // d x d, zero rows and columns for absent tokens
};

/// Single-head scaled dot-product attention restricted to present tokens.
AttentionResult attention(Var tokens, const TokenMask& mask, const AttentionHead& head);

/// Present rows become token + table row; absent rows are zero.
Var add_positional_encoding(Var tokens, Var table, const TokenMask& mask);

enum class InitKind { Weight, Zero };

struct ParamSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t fan_in = 1;
  InitKind init = InitKind::Weight;
  bool vector = false;  // store as rank 1 of length cols
};

/// Weights ~ U(-sqrt(1/fan_in), +sqrt(1/fan_in)) in `specs` order from one
/// mt19937_64 stream; Zero entries are zero-filled.
ParamStore init_params(std::span<const ParamSpec> specs, std::uint64_t seed);

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_uniform(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace ionflux::nn
