#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ionflux/ad/num_array.hpp"
#include "ionflux/ad/tape.hpp"

namespace ionflux::nn {

using ad::NumArray;

struct ParamEntry {
  std::string name;
  NumArray value;
  bool frozen = false;
  // Adam moments, same shape as value.
  NumArray m;
  NumArray v;
};

/// Gradients aligned with ParamStore entry order.
using Gradients = std::vector<NumArray>;

/// Flat, ordered collection of named parameter arrays.
class ParamStore {
 public:
  void add(std::string name, NumArray value, bool frozen = false);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  const ParamEntry& entry(std::size_t i) const { return entries_[i]; }
  ParamEntry& entry(std::size_t i) { return entries_[i]; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  const NumArray& value(std::string_view name) const { return entries_[index_of(name)].value; }
  NumArray& value(std::string_view name) { return entries_[index_of(name)].value; }

  void set_frozen(std::string_view name, bool frozen);
  /// Names of frozen arrays, in store order.
  std::vector<std::string> frozen_names() const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }
  void reset_optimizer_state();

  /// Puts every array on the tape: unfrozen ones as variables, frozen ones as
  /// constants (or as variables when all_variables is set).
  std::vector<ad::Var> bind(ad::Tape& tape, bool all_variables = false) const;

  Gradients zero_gradients() const;
  /// grads[i] += weight * d(root)/d(entry i), for entries bound as variables.
  void accumulate(const ad::Tape& tape, const std::vector<ad::Var>& bound, Gradients& grads,
                  double weight = 1.0) const;

  /// Same names, shapes, flags and bit-identical values.
  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<ParamEntry> entries_;
  std::uint64_t step_ = 0;
};

/// Total element count over all parameter arrays.
std::size_t count_params(const ParamStore& store);

}  // namespace ionflux::nn
