#include "ionflux/data/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ionflux::data {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// (0, 1], never 0 so the log below is finite.
double open_uniform(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53; }

}  // namespace

void assign_sigma(RolloutSample& sample, const NoiseModel& model) {
  sample.sigma = NumArray(sample.points(), kNumIons, 0.0);
  for (std::size_t i = 0; i < sample.points(); ++i) {
    double mx = 0.0;
    for (std::size_t j = 0; j < kNumIons; ++j)
      if (sample.composition.present[j]) mx = std::max(mx, sample.conc(i, j));
    for (std::size_t j = 0; j < kNumIons; ++j)
      if (sample.composition.present[j]) sample.sigma(i, j) = model.rel * sample.conc(i, j) + model.abs_frac * mx;
  }
}

double keyed_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t epoch, std::uint64_t i,
                    std::uint64_t j) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ stream);
  h = splitmix(h ^ epoch);
  h = splitmix(h ^ i);
  h = splitmix(h ^ j);
  const double u1 = open_uniform(h);
  const double u2 = open_uniform(splitmix(h));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t stream_key(std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

NumArray sample_noisy_targets(const RolloutSample& sample, std::uint64_t seed, std::uint64_t epoch,
                              std::size_t* clamped) {
  NumArray out = sample.conc;
  const std::uint64_t key = stream_key(sample.id);
  for (std::size_t i = 0; i < sample.points(); ++i) {
    for (std::size_t j = 0; j < kNumIons; ++j) {
      if (!sample.composition.present[j]) continue;
      const double s = sample.sigma(i, j);
      if (s == 0.0) continue;
      double v = sample.conc(i, j) + s * keyed_normal(seed, key, epoch, i, j);
      if (v < 0.0) {
        v = 0.0;
        if (clamped) ++*clamped;
      }
      out(i, j) = v;
    }
  }
  return out;
}

}  // namespace ionflux::data
