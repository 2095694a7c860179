#include "ionflux/data/composition.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ionflux/nn/layers.hpp"

namespace ionflux::data {

std::size_t MixtureComposition::count() const {
  return static_cast<std::size_t>(std::count(present.begin(), present.end(), true));
}

double MixtureComposition::max_concentration() const {
  double m = 0.0;
  for (std::size_t j = 0; j < kNumIons; ++j)
    if (present[j]) m = std::max(m, c_in[j]);
  return m;
}

double MixtureComposition::charge_residual() const {
  double r = 0.0;
  for (std::size_t j = 0; j < kNumIons; ++j)
    if (present[j]) r += ion_table()[j].valence * c_in[j];
  return r;
}

MixtureComposition validate_composition(std::span<const double> c) {
  std::array<bool, kNumIons> mask{};
  if (c.size() == kNumIons)
    for (std::size_t j = 0; j < kNumIons; ++j) mask[j] = c[j] > 0.0;
  return validate_composition(c, std::span<const bool>(mask.data(), mask.size()));
}

MixtureComposition validate_composition(std::span<const double> c, std::span<const bool> present) {
  if (c.size() != kNumIons || present.size() != kNumIons) {
    throw std::invalid_argument("composition must have " + std::to_string(kNumIons) + " entries, got " +
                                std::to_string(c.size()));
  }
  MixtureComposition out;
  bool cation = false, anion = false;
  double scale = 0.0;
  for (std::size_t j = 0; j < kNumIons; ++j) {
    if (!std::isfinite(c[j]) || c[j] < 0.0) {
      throw std::invalid_argument("concentration of " + std::string(ion_table()[j].name) +
                                  " must be finite and >= 0");
    }
    out.present[j] = present[j];
    out.c_in[j] = present[j] ? c[j] : 0.0;
    if (!present[j]) continue;
    const int z = ion_table()[j].valence;
    cation |= z > 0;
    anion |= z < 0;
    scale += std::abs(z) * c[j];
  }
  if (!cation || !anion) {
    throw MissingCounterIonError(std::string("composition needs at least one ") + (cation ? "anion" : "cation"));
  }
  const double residual = out.charge_residual();
  if (std::abs(residual) > kNeutralityRtol * scale) {
    throw ElectroneutralityError("feed is not electroneutral: sum z c = " + std::to_string(residual) +
                                     " mol/m^3",
                                 residual);
  }
  return out;
}

MixtureComposition sample_composition(std::mt19937_64& rng, double lo, double hi) {
  std::vector<std::size_t> cations, anions;
  for (std::size_t j = 0; j < kNumIons; ++j) (ion_table()[j].valence > 0 ? cations : anions).push_back(j);

  const auto draw = [&](std::size_t n) { return static_cast<std::size_t>(nn::unit_uniform(rng()) * n); };
  const std::size_t total = 2 + draw(4);
  const std::size_t max_cat = std::min(cations.size(), total - 1);
  const std::size_t min_cat = total > anions.size() ? total - anions.size() : 1;
  const std::size_t n_cat = min_cat + draw(max_cat - min_cat + 1);
  const std::size_t n_an = total - n_cat;

  const auto pick = [&](std::vector<std::size_t> pool, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + draw(pool.size() - i)]);
    pool.resize(n);
    return pool;
  };
  const auto log_uniform = [&] { return lo * std::pow(hi / lo, nn::unit_uniform(rng())); };

  MixtureComposition m;
  double pos = 0.0, neg = 0.0;
  for (std::size_t j : pick(cations, n_cat)) {
    m.present[j] = true;
    m.c_in[j] = log_uniform();
    pos += ion_table()[j].valence * m.c_in[j];
  }
  const auto an = pick(anions, n_an);
  for (std::size_t j : an) {
    m.present[j] = true;
    m.c_in[j] = log_uniform();
    neg -= ion_table()[j].valence * m.c_in[j];
  }
  const double factor = pos / neg;
  for (std::size_t j : an) m.c_in[j] *= factor;
  return m;
}

}  // namespace ionflux::data
