#include "ionflux/nn/param_store.hpp"

#include <stdexcept>

namespace ionflux::nn {

void ParamStore::add(std::string name, NumArray value, bool frozen) {
  if (contains(name)) throw std::invalid_argument("ParamStore: duplicate array '" + name + "'");
  if (!value.all_finite()) throw ad::NonFiniteError("ParamStore: non-finite values in '" + name + "'");
  ParamEntry e;
  e.name = std::move(name);
  e.m = value;
  e.m.fill(0.0);
  e.v = e.m;
  e.value = std::move(value);
  e.frozen = frozen;
  entries_.push_back(std::move(e));
}

bool ParamStore::contains(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  throw std::out_of_range("ParamStore: no array named '" + std::string(name) + "'");
}

void ParamStore::set_frozen(std::string_view name, bool frozen) {
  entries_[index_of(name)].frozen = frozen;
}

std::vector<std::string> ParamStore::frozen_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (e.frozen) out.push_back(e.name);
  return out;
}

void ParamStore::reset_optimizer_state() {
  for (auto& e : entries_) {
    e.m.fill(0.0);
    e.v.fill(0.0);
  }
  step_ = 0;
}

std::vector<ad::Var> ParamStore::bind(ad::Tape& tape, bool all_variables) const {
  std::vector<ad::Var> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) {
    out.push_back(e.frozen && !all_variables ? tape.constant(e.value) : tape.variable(e.value));
  }
  return out;
}

Gradients ParamStore::zero_gradients() const {
  Gradients g;
  g.reserve(entries_.size());
  for (const auto& e : entries_) {
    NumArray z = e.value;
    z.fill(0.0);
    g.push_back(std::move(z));
  }
  return g;
}

void ParamStore::accumulate(const ad::Tape& tape, const std::vector<ad::Var>& bound,
                            Gradients& grads, double weight) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!tape.requires_grad(bound[i])) continue;
    const NumArray g = tape.grad(bound[i]);
    for (std::size_t j = 0; j < g.size(); ++j) grads[i][j] += weight * g[j];
  }
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.frozen != y.frozen || !(x.value == y.value)) return false;
  }
  return true;
}

std::size_t count_params(const ParamStore& store) {
  std::size_t n = 0;
  for (const auto& e : store.entries()) n += e.value.size();
  return n;
}

}  // namespace ionflux::nn
