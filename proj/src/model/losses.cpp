#include "ionflux/model/losses.hpp"

#include <stdexcept>
#include <string>

namespace ionflux::model {

namespace {

std::size_t present_count(const std::vector<bool>& present) {
  std::size_t n = 0;
  for (bool p : present) n += p;
  if (n == 0) throw std::invalid_argument("loss: every ion is masked out");
  return n;
}

void check_shapes(const NumArray& pred, const NumArray& target, const std::vector<bool>& present) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ad::ShapeError("loss: prediction " + pred.shape_string() + " vs target " + target.shape_string());
  }
  if (pred.cols() != present.size()) throw ad::ShapeError("loss: mask length differs from prediction width");
  if (pred.rows() == 0) throw std::invalid_argument("loss: no rows");
}

NumArray mask_row(const std::vector<bool>& present) {
  NumArray m(1, present.size(), 0.0);
  for (std::size_t j = 0; j < present.size(); ++j) m[j] = present[j] ? 1.0 : 0.0;
  return m;
}

}  // namespace

Var pretrain_loss(Var pred, const NumArray& target, const std::vector<bool>& present) {
  check_shapes(pred.value(), target, present);
  const std::size_t n = present_count(present);
  ad::Tape& tape = *pred.tape();
  Var diff = ad::mul(ad::sub(pred, tape.constant(target)), tape.constant(mask_row(present)));
  return ad::scale(ad::sum(ad::square(diff)), 1.0 / static_cast<double>(pred.value().rows() * n));
}

double pretrain_loss(const NumArray& pred, const NumArray& target, const std::vector<bool>& present) {
  check_shapes(pred, target, present);
  const std::size_t n = present_count(present);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i)
    for (std::size_t j = 0; j < pred.cols(); ++j)
      if (present[j]) s += (pred(i, j) - target(i, j)) * (pred(i, j) - target(i, j));
  return s / static_cast<double>(pred.rows() * n);
}

Var finetune_loss(Var pred, const NumArray& noisy, const std::vector<bool>& present) {
  return pretrain_loss(pred, noisy, present);
}

double finetune_loss(const NumArray& pred, const NumArray& noisy, const std::vector<bool>& present) {
  return pretrain_loss(pred, noisy, present);
}

Var soft_penalty(Var states, std::span<const double> z, const std::vector<bool>& present) {
  const NumArray& h = states.value();
  if (h.cols() != z.size() || z.size() != present.size()) throw ad::ShapeError("soft_penalty: width mismatch");
  NumArray zc(z.size(), 1, 0.0);
  for (std::size_t j = 0; j < z.size(); ++j) zc[j] = present[j] ? z[j] : 0.0;
  Var charge = ad::matmul(states, states.tape()->constant(zc));
  return ad::mean(ad::square(charge));
}

double soft_penalty(const NumArray& states, std::span<const double> z, const std::vector<bool>& present) {
  if (states.cols() != z.size() || z.size() != present.size()) throw ad::ShapeError("soft_penalty: width mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < states.rows(); ++i) {
    double q = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j)
      if (present[j]) q += z[j] * states(i, j);
    s += q * q;
  }
  return s / static_cast<double>(states.rows());
}

}  // namespace ionflux::model
