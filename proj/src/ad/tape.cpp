#include "ionflux/ad/tape.hpp"

#include <algorithm>
#include <cmath>

namespace ionflux::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "elementwise-mul";
    case OpKind::Scale: return "scalar-mul";
    case OpKind::MatMul: return "matmul";
    case OpKind::Tanh: return "tanh";
    case OpKind::Softmax: return "softmax";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
    case OpKind::Square: return "square";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::MaskedFill: return "masked-fill";
    case OpKind::Transpose: return "transpose";
    case OpKind::Reshape: return "reshape";
    case OpKind::LinComb: return "lincomb";
  }
  return "unknown";
}

const NumArray& Var::value() const { return tape_->value(*this); }

namespace {

[[noreturn]] void shape_fail(OpKind kind, const NumArray& a, const NumArray& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + a.shape_string() +
                   " and " + b.shape_string());
}

std::size_t bdim(std::size_t x, std::size_t y, bool& ok) {
  if (x == y) return x;
  if (x == 1) return y;
  if (y == 1) return x;
  ok = false;
  return 0;
}

NumArray make_result(std::size_t rows, std::size_t cols, bool rank1) {
  if (rank1 && rows == 1) return NumArray(std::vector<double>(cols, 0.0));
  return NumArray(rows, cols, 0.0);
}

Tape* common_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw std::invalid_argument("operands must live on the same tape");
  }
  return a.tape();
}

// target += reduce(g * factor) where target may be broadcast along either axis.
template <typename Factor>
void accumulate_broadcast(NumArray& target, const NumArray& g, Factor factor) {
  const std::size_t tr = target.rows(), tc = target.cols();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const std::size_t rr = tr == 1 ? 0 : r;
    for (std::size_t c = 0; c < g.cols(); ++c) {
      const std::size_t cc = tc == 1 ? 0 : c;
      target(rr, cc) += g(r, c) * factor(r, c);
    }
  }
}

}  // namespace

Var Tape::push(Node node) {
  if (!node.value.all_finite()) {
    throw NonFiniteError(std::string(op_name(node.kind)) + ": non-finite value " +
                         node.value.shape_string());
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(NumArray value) {
  Node n;
  n.kind = OpKind::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(NumArray value) {
  Node n;
  n.kind = OpKind::Leaf;
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

NumArray Tape::grad(Var v) const {
  const Node& n = nodes_[v.index()];
  if (n.adjoint.empty() && !n.value.empty()) {
    NumArray z = n.value;
    z.fill(0.0);
    return z;
  }
  return n.adjoint;
}

NumArray& Tape::adjoint_of(std::uint32_t index) {
  Node& n = nodes_[index];
  if (n.adjoint.size() != n.value.size()) {
    n.adjoint = n.value;
    n.adjoint.fill(0.0);
  }
  return n.adjoint;
}

void Tape::rewind(std::size_t mark) {
  if (mark < nodes_.size()) nodes_.resize(mark);
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::invalid_argument("backward: root is not on this tape");
  const Node& r = nodes_[root.index()];
  if (r.value.size() != 1) {
    throw std::invalid_argument("backward: non-scalar root of shape " + r.value.shape_string());
  }
  for (auto& n : nodes_) n.adjoint = NumArray();
  adjoint_of(root.index())[0] = 1.0;
  for (std::size_t i = root.index() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || n.kind == OpKind::Leaf || n.adjoint.empty()) continue;
    propagate(n);
  }
}

void Tape::propagate(const Node& n) {
  const NumArray& g = n.adjoint;
  auto wants = [&](std::uint32_t idx) { return nodes_[idx].requires_grad; };

  switch (n.kind) {
    case OpKind::Leaf:
      break;
    case OpKind::Add:
    case OpKind::Sub: {
      if (wants(n.a)) accumulate_broadcast(adjoint_of(n.a), g, [](auto, auto) { return 1.0; });
      const double sign = n.kind == OpKind::Add ? 1.0 : -1.0;
      if (wants(n.b)) accumulate_broadcast(adjoint_of(n.b), g, [sign](auto, auto) { return sign; });
      break;
    }
    case OpKind::Mul: {
      const NumArray& av = nodes_[n.a].value;
      const NumArray& bv = nodes_[n.b].value;
      auto at = [](const NumArray& x, std::size_t r, std::size_t c) {
        return x(x.rows() == 1 ? 0 : r, x.cols() == 1 ? 0 : c);
      };
      if (wants(n.a)) {
        accumulate_broadcast(adjoint_of(n.a), g, [&](std::size_t r, std::size_t c) { return at(bv, r, c); });
      }
      if (wants(n.b)) {
        accumulate_broadcast(adjoint_of(n.b), g, [&](std::size_t r, std::size_t c) { return at(av, r, c); });
      }
      break;
    }
    case OpKind::Scale: {
      NumArray& ga = adjoint_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * g[i];
      break;
    }
    case OpKind::MatMul: {
      const NumArray& A = nodes_[n.a].value;
      const NumArray& B = nodes_[n.b].value;
      const bool tb = n.p0 != 0;
      const std::size_t m = A.rows(), k = A.cols(), cols = g.cols();
      if (wants(n.a)) {
        NumArray& gA = adjoint_of(n.a);
        // gA = g * B^T  (or g * B when B was transposed)
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < cols; ++j) {
            const double gij = g(i, j);
            if (gij == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) gA(i, p) += gij * (tb ? B(j, p) : B(p, j));
          }
        }
      }
      if (wants(n.b)) {
        NumArray& gB = adjoint_of(n.b);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A(i, p);
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) {
              if (tb) gB(j, p) += aip * g(i, j);
              else gB(p, j) += aip * g(i, j);
            }
          }
        }
      }
      break;
    }
    case OpKind::Tanh: {
      NumArray& ga = adjoint_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    }
    case OpKind::Softmax: {
      NumArray& ga = adjoint_of(n.a);
      const NumArray& y = n.value;
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
      }
      break;
    }
    case OpKind::Mean:
    case OpKind::Sum: {
      NumArray& ga = adjoint_of(n.a);
      const double w = n.kind == OpKind::Mean ? g[0] / static_cast<double>(ga.size()) : g[0];
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += w;
      break;
    }
    case OpKind::Square: {
      NumArray& ga = adjoint_of(n.a);
      const NumArray& x = nodes_[n.a].value;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * x[i] * g[i];
      break;
    }
    case OpKind::Concat: {
      const bool rows_axis = n.p0 == 0;
      const NumArray& av = nodes_[n.a].value;
      if (wants(n.a)) {
        NumArray& ga = adjoint_of(n.a);
        for (std::size_t r = 0; r < av.rows(); ++r)
          for (std::size_t c = 0; c < av.cols(); ++c) ga(r, c) += g(r, c);
      }
      if (wants(n.b)) {
        NumArray& gb = adjoint_of(n.b);
        const std::size_t ro = rows_axis ? av.rows() : 0, co = rows_axis ? 0 : av.cols();
        for (std::size_t r = 0; r < gb.rows(); ++r)
          for (std::size_t c = 0; c < gb.cols(); ++c) gb(r, c) += g(r + ro, c + co);
      }
      break;
    }
    case OpKind::Slice: {
      NumArray& ga = adjoint_of(n.a);
      const bool rows_axis = n.p0 == 0;
      const std::size_t ro = rows_axis ? n.p1 : 0, co = rows_axis ? 0 : n.p1;
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) ga(r + ro, c + co) += g(r, c);
      break;
    }
    case OpKind::MaskedFill:
    case OpKind::Reshape: {
      NumArray& ga = adjoint_of(n.a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      break;
    }
    case OpKind::Transpose: {
      NumArray& ga = adjoint_of(n.a);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
      break;
    }
    case OpKind::LinComb: {
      if (wants(n.a)) {
        NumArray& ga = adjoint_of(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      for (std::size_t t = 0; t < n.terms.size(); ++t) {
        if (!wants(n.terms[t]) || n.coeffs[t] == 0.0) continue;
        NumArray& gt = adjoint_of(n.terms[t]);
        const double w = n.coeffs[t];
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += w * g[i];
      }
      break;
    }
  }
}

namespace {

template <typename Fn>
NumArray broadcast_binary(OpKind kind, const NumArray& a, const NumArray& b, Fn fn) {
  bool ok = true;
  const std::size_t rows = bdim(a.rows(), b.rows(), ok);
  const std::size_t cols = bdim(a.cols(), b.cols(), ok);
  if (!ok) shape_fail(kind, a, b);
  NumArray out = make_result(rows, cols, a.rank() == 1 && b.rank() == 1);
  const bool ar = a.rows() == 1, ac = a.cols() == 1, br = b.rows() == 1, bc = b.cols() == 1;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out(r, c) = fn(a(ar ? 0 : r, ac ? 0 : c), b(br ? 0 : r, bc ? 0 : c));
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  Tape* t = common_tape(a, b);
  Tape::Node n;
  n.kind = OpKind::Add;
  n.a = a.index();
  n.b = b.index();
  n.requires_grad = t->requires_grad(a) || t->requires_grad(b);
  n.value = broadcast_binary(n.kind, a.value(), b.value(), [](double x, double y) { return x + y; });
  return t->push(std::move(n));
}

Var sub(Var a, Var b) {
  Tape* t = common_tape(a, b);
  Tape::Node n;
  n.kind = OpKind::Sub;
  n.a = a.index();
  n.b = b.index();
  n.requires_grad = t->requires_grad(a) || t->requires_grad(b);
  n.value = broadcast_binary(n.kind, a.value(), b.value(), [](double x, double y) { return x - y; });
  return t->push(std::move(n));
}

Var mul(Var a, Var b) {
  Tape* t = common_tape(a, b);
  Tape::Node n;
  n.kind = OpKind::Mul;
  n.a = a.index();
  n.b = b.index();
  n.requires_grad = t->requires_grad(a) || t->requires_grad(b);
  n.value = broadcast_binary(n.kind, a.value(), b.value(), [](double x, double y) { return x * y; });
  return t->push(std::move(n));
}

Var scale(Var a, double s) {
  Tape* t = a.tape();
  Tape::Node n;
  n.kind = OpKind::Scale;
  n.a = a.index();
  n.scalar = s;
  n.requires_grad = t->requires_grad(a);
  n.value = a.value();
  for (auto& v : n.value.values()) v *= s;
  return t->push(std::move(n));
}

Var matmul(Var a, Var b, bool transpose_b) {
  Tape* t = common_tape(a, b);
  const NumArray& A = a.value();
  const NumArray& B = b.value();
  const std::size_t m = A.rows(), k = A.cols();
  const std::size_t kb = transpose_b ? B.cols() : B.rows();
  const std::size_t cols = transpose_b ? B.rows() : B.cols();
  if (k != kb) {
    throw ShapeError(std::string("matmul: inner dimensions differ for ") + A.shape_string() + " x " +
                     B.shape_string() + (transpose_b ? "^T" : ""));
  }
  Tape::Node n;
  n.kind = OpKind::MatMul;
  n.a = a.index();
  n.b = b.index();
  n.p0 = transpose_b ? 1 : 0;
  n.requires_grad = t->requires_grad(a) || t->requires_grad(b);
  NumArray out(m, cols, 0.0);
  if (transpose_b) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += A(i, p) * B(j, p);
        out(i, j) = s;
      }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A(i, p);
        if (aip == 0.0) continue;
        for (std::size_t j = 0; j < cols; ++j) out(i, j) += aip * B(p, j);
      }
  }
  n.value = std::move(out);
  return t->push(std::move(n));
}

Var tanh(Var a) {
  Tape* t = a.tape();
  Tape::Node n;
  n.kind = OpKind::Tanh;
  n.a = a.index();
  n.requires_grad = t->requires_grad(a);
  n.value = a.value();
  for (auto& v : n.value.values()) v = std::tanh(v);
  return t->push(std::move(n));
}

Var softmax(Var a) {
  Tape* t = a.tape();
  Tape::Node n;
  n.kind = OpKind::Softmax;
  n.a = a.index();
  n.requires_grad = t->requires_grad(a);
  n.value = a.value();
  NumArray& y = n.value;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double mx = y(r, 0);
    for (std::size_t c = 1; c < y.cols(); ++c) mx = std::max(mx, y(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c) {
      y(r, c) = std::exp(y(r, c) - mx);
      total += y(r, c);
    }
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) /= total;
  }
  return t->push(std::move(n));
}

Var mean(Var a) {
  Tape* t = a.tape();
  const NumArray& x = a.value();
  if (x.empty()) throw ShapeError("mean: empty input");
  Tape::Node n;
  n.kind = OpKind::Mean;
  n.a = a.index();
  n.requires_grad = t->requires_grad(a);
  double s = 0.0;
  for (double v : x.values()) s += v;
  n.value = NumArray(std::vector<double>{s / static_cast<double>(x.size())});
  return t->push(std::move(n));
}

Var sum(Var a) {
  Tape* t = a.tape();
  Tape::Node n;
  n.kind = OpKind::Sum;
  n.a = a.index();
  n.requires_grad = t->requires_grad(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  n.value = NumArray(std::vector<double>{s});
  return t->push(std::move(n));
}

Var square(Var a) {
  Tape* t = a.tape();
  Tape::Node n;
  n.kind = OpKind::Square;
  n.a = a.index();
  n.requires_grad = t->requires_grad(a);
  n.value = a.value();
  for (auto& v : n.value.values()) v *= v;
  return t->push(std::move(n));
}

Var concat(Var a, Var b, int axis) {
  Tape* t = common_tape(a, b);
  const NumArray& A = a.value();
  const NumArray& B = b.value();
  Tape::Node n;
  n.kind = OpKind::Concat;
  n.a = a.index();
  n.b = b.index();
  n.p0 = axis == 0 ? 0 : 1;
  n.requires_grad = t->requires_grad(a) || t->requires_grad(b);
  if (axis == 0) {
    if (A.cols() != B.cols()) shape_fail(n.kind, A, B);
    std::vector<double> data(A.vec());
    data.insert(data.end(), B.vec().begin(), B.vec().end());
    n.value = NumArray(A.rows() + B.rows(), A.cols(), std::move(data));
  } else if (axis == 1) {
    if (A.rows() != B.rows()) shape_fail(n.kind, A, B);
    NumArray out = make_result(A.rows(), A.cols() + B.cols(), A.rank() == 1 && B.rank() == 1);
    for (std::size_t r = 0; r < A.rows(); ++r) {
      for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) = A(r, c);
      for (std::size_t c = 0; c < B.cols(); ++c) out(r, A.cols() + c) = B(r, c);
    }
    n.value = std::move(out);
  } else {
    throw ShapeError("concat: axis must be 0 or 1");
  }
  return t->push(std::move(n));
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  Tape* t = a.tape();
  const NumArray& A = a.value();
  const std::size_t extent = axis == 0 ? A.rows() : A.cols();
  if ((axis != 0 && axis != 1) || begin >= end || end > extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + A.shape_string() + " on axis " + std::to_string(axis));
  }
  Tape::Node n;
  n.kind = OpKind::Slice;
  n.a = a.index();
  n.p0 = axis == 0 ? 0 : 1;
  n.p1 = begin;
  n.requires_grad = t->requires_grad(a);
  const std::size_t rows = axis == 0 ? end - begin : A.rows();
  const std::size_t cols = axis == 0 ? A.cols() : end - begin;
  NumArray out = make_result(rows, cols, A.rank() == 1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out(r, c) = axis == 0 ? A(r + begin, c) : A(r, c + begin);
  n.value = std::move(out);
  return t->push(std::move(n));
}

Var masked_fill(Var a, const NumArray& keep_mask, double fill) {
  Tape* t = a.tape();
  const NumArray& A = a.value();
  if ((keep_mask.rows() != A.rows() && keep_mask.rows() != 1) ||
      (keep_mask.cols() != A.cols() && keep_mask.cols() != 1)) {
    shape_fail(OpKind::MaskedFill, A, keep_mask);
  }
  Tape::Node n;
  n.kind = OpKind::MaskedFill;
  n.a = a.index();
  n.requires_grad = t->requires_grad(a);
  n.value = A;
  const bool mr = keep_mask.rows() == 1, mc = keep_mask.cols() == 1;
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c)
      if (keep_mask(mr ? 0 : r, mc ? 0 : c) == 0.0) n.value(r, c) += fill;
  return t->push(std::move(n));
}

Var transpose(Var a) {
  Tape* t = a.tape();
  const NumArray& A = a.value();
  Tape::Node n;
  n.kind = OpKind::Transpose;
  n.a = a.index();
  n.requires_grad = t->requires_grad(a);
  NumArray out(A.cols(), A.rows(), 0.0);
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) out(c, r) = A(r, c);
  n.value = std::move(out);
  return t->push(std::move(n));
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape* t = a.tape();
  Tape::Node n;
  n.kind = OpKind::Reshape;
  n.a = a.index();
  n.requires_grad = t->requires_grad(a);
  n.value = a.value().reshaped(rows, cols);
  return t->push(std::move(n));
}

Var lincomb(Var base, std::span<const double> coeffs, std::span<const Var> terms) {
  Tape* t = base.tape();
  if (coeffs.size() != terms.size()) throw ShapeError("lincomb: coefficient/term count mismatch");
  Tape::Node n;
  n.kind = OpKind::LinComb;
  n.a = base.index();
  n.requires_grad = t->requires_grad(base);
  n.value = base.value();
  n.terms.reserve(terms.size());
  n.coeffs.assign(coeffs.begin(), coeffs.end());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const NumArray& x = terms[i].value();
    if (x.size() != n.value.size()) shape_fail(n.kind, n.value, x);
    n.terms.push_back(terms[i].index());
    n.requires_grad = n.requires_grad || t->requires_grad(terms[i]);
    const double w = coeffs[i];
    if (w == 0.0) continue;
    for (std::size_t j = 0; j < x.size(); ++j) n.value[j] += w * x[j];
  }
  return t->push(std::move(n));
}

Var forward_op(OpKind kind, std::span<const Var> in) {
  auto need = [&](std::size_t count) {
    if (in.size() != count) {
      throw std::invalid_argument(std::string(op_name(kind)) + ": expected " +
                                  std::to_string(count) + " inputs");
    }
  };
  switch (kind) {
    case OpKind::Add: need(2); return add(in[0], in[1]);
    case OpKind::Sub: need(2); return sub(in[0], in[1]);
    case OpKind::Mul: need(2); return mul(in[0], in[1]);
    case OpKind::MatMul: need(2); return matmul(in[0], in[1]);
    case OpKind::Tanh: need(1); return tanh(in[0]);
    case OpKind::Softmax: need(1); return softmax(in[0]);
    case OpKind::Mean: need(1); return mean(in[0]);
    case OpKind::Sum: need(1); return sum(in[0]);
    case OpKind::Square: need(1); return square(in[0]);
    case OpKind::Transpose: need(1); return transpose(in[0]);
    default:
      throw std::invalid_argument(std::string(op_name(kind)) +
                                  ": requires parameters; call the named function");
  }
}

}  // namespace ionflux::ad
