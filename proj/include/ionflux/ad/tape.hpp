#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ionflux/ad/num_array.hpp"

namespace ionflux::ad {

enum class OpKind : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  MatMul,
  Tanh,
  Softmax,
  Mean,
  Sum,
  Square,
  Concat,
  Slice,
  MaskedFill,
  Transpose,
  Reshape,
  LinComb,
};

std::string_view op_name(OpKind kind);

/// Large negative additive constant used by masked_fill.
inline constexpr double kMaskFill = -1e9;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is
/// rewound past it or destroyed.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return index_; }
  const NumArray& value() const;

 private:
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// so inputs always precede outputs. Not thread-safe; use one tape per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that does not take gradients.
  Var constant(NumArray value);
  /// Leaf that accumulates an adjoint in backward().
  Var variable(NumArray value);

  const NumArray& value(Var v) const { return nodes_[v.index()].value; }
  /// Adjoint of v after backward(); zeros if v was not reached.
  NumArray grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.index()].requires_grad; }
  OpKind kind(Var v) const { return nodes_[v.index()].kind; }

  /// Populates adjoints of every node reachable from a scalar root.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  std::size_t mark() const { return nodes_.size(); }
  /// Drops every node created after `mark`.
  void rewind(std::size_t mark);
  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    bool requires_grad = false;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::size_t p0 = 0;
    std::size_t p1 = 0;
    double scalar = 0.0;
    NumArray value;
    NumArray adjoint;
    NumArray aux;
    std::vector<std::uint32_t> terms;
    std::vector<double> coeffs;
  };

  Var push(Node node);
  NumArray& adjoint_of(std::uint32_t index);
  void propagate(const Node& node);

  std::vector<Node> nodes_;

  friend Var add(Var, Var);
  friend Var sub(Var, Var);
  friend Var mul(Var, Var);
  friend Var scale(Var, double);
  friend Var matmul(Var, Var, bool);
  friend Var tanh(Var);
  friend Var softmax(Var);
  friend Var mean(Var);
  friend Var sum(Var);
  friend Var square(Var);
  friend Var concat(Var, Var, int);
  friend Var slice(Var, int, std::size_t, std::size_t);
  friend Var masked_fill(Var, const NumArray&, double);
  friend Var transpose(Var);
  friend Var reshape(Var, std::size_t, std::size_t);
  friend Var lincomb(Var, std::span<const double>, std::span<const Var>);
};

// Binary elementwise ops broadcast 2-D operands whose extents are equal or 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// a * b, or a * b^T when transpose_b is set.
Var matmul(Var a, Var b, bool transpose_b = false);
Var tanh(Var a);
/// Row-wise softmax over the last axis.
Var softmax(Var a);
Var mean(Var a);
Var sum(Var a);
Var square(Var a);
/// axis 0 stacks rows, axis 1 appends columns.
Var concat(Var a, Var b, int axis);
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
/// Adds `fill` wherever keep_mask is zero. keep_mask broadcasts like add().
Var masked_fill(Var a, const NumArray& keep_mask, double fill = kMaskFill);
Var transpose(Var a);
Var reshape(Var a, std::size_t rows, std::size_t cols);
/// base + sum_i coeffs[i] * terms[i], all of one shape.
Var lincomb(Var base, std::span<const double> coeffs, std::span<const Var> terms);

/// Dispatch for parameter-free kinds (Add, Sub, Mul, MatMul, Tanh, Softmax,
/// Mean, Sum, Square, Transpose).
Var forward_op(OpKind kind, std::span<const Var> inputs);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace ionflux::ad
