#include "ionflux/bench/benchmark.hpp"

#include <algorithm>
#include <random>

#include "ionflux/dspm/generate.hpp"

namespace ionflux::bench {

namespace {

nlohmann::json membrane_json(const dspm::MembraneParams& m) {
  return {{"pore_radius", m.pore_radius}, {"thickness", m.thickness}, {"charge", m.charge}};
}

dspm::MembraneParams membrane_from(const nlohmann::json& j, dspm::MembraneParams m) {
  m.pore_radius = j.value("pore_radius", m.pore_radius);
  m.thickness = j.value("thickness", m.thickness);
  m.charge = j.value("charge", m.charge);
  return m;
}

std::string sample_id(std::size_t i) {
  std::string n = std::to_string(i);
  return "mix-" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
}

}  // namespace

nlohmann::json BenchmarkConfig::to_json() const {
  return {{"seed", seed},
          {"compositions", compositions},
          {"test_fraction", test_fraction},
          {"grid_points", grid_points},
          {"flux_max", flux_max},
          {"finetune_compositions", finetune_compositions},
          {"finetune_points", finetune_points},
          {"nominal_membrane", membrane_json(nominal)},
          {"shifted_membrane", membrane_json(shifted)},
          {"noise", {{"rel", noise.rel}, {"abs_frac", noise.abs_frac}}}};
}

BenchmarkConfig BenchmarkConfig::from_json(const nlohmann::json& j) {
  BenchmarkConfig c;
  c.seed = j.value("seed", c.seed);
  c.compositions = j.value("compositions", c.compositions);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.grid_points = j.value("grid_points", c.grid_points);
  c.flux_max = j.value("flux_max", c.flux_max);
  c.finetune_compositions = j.value("finetune_compositions", c.finetune_compositions);
  c.finetune_points = j.value("finetune_points", c.finetune_points);
  if (j.contains("nominal_membrane")) c.nominal = membrane_from(j.at("nominal_membrane"), c.nominal);
  if (j.contains("shifted_membrane")) c.shifted = membrane_from(j.at("shifted_membrane"), c.shifted);
  if (j.contains("noise")) {
    c.noise.rel = j.at("noise").value("rel", c.noise.rel);
    c.noise.abs_frac = j.at("noise").value("abs_frac", c.noise.abs_frac);
  }
  return c;
}

std::vector<double> uniform_grid(std::size_t points, double max) {
  if (points < 2) throw std::invalid_argument("flux grid needs at least 2 points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = max * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

BenchmarkData make_benchmark_data(const BenchmarkConfig& cfg) {
  if (cfg.finetune_points < 2) throw std::invalid_argument("benchmark: finetune_points must be >= 2");
  std::mt19937_64 rng(cfg.seed);
  const auto grid = uniform_grid(cfg.grid_points, cfg.flux_max);
  std::vector<dspm::SampleRequest> all;
  for (std::size_t i = 0; i < cfg.compositions; ++i) all.push_back({sample_id(i), data::sample_composition(rng), grid});

  BenchmarkData out;
  dspm::GenerateOptions sim;
  sim.threads = cfg.threads;
  auto simulated = dspm::generate_dataset(all, cfg.nominal, {}, sim);
  out.failures = simulated.failures;
  auto parts = data::split(simulated.samples, 1.0 - cfg.test_fraction, cfg.seed);
  out.pretrain = std::move(parts.train);

  dspm::GenerateOptions pseudo = sim;
  pseudo.provenance = data::Provenance::PseudoExperimental;
  std::vector<dspm::SampleRequest> test_req;
  for (const auto& s : parts.test) test_req.push_back({s.id, s.composition, grid});
  auto test = dspm::generate_dataset(test_req, cfg.shifted, {}, pseudo);
  out.test = std::move(test.samples);
  out.failures.insert(out.failures.end(), test.failures.begin(), test.failures.end());

  std::vector<dspm::SampleRequest> ft_req;
  const std::size_t n_ft = std::min(cfg.finetune_compositions, out.pretrain.size());
  for (std::size_t i = 0; i < n_ft; ++i) {
    const auto& s = out.pretrain[i];
    std::mt19937_64 frng(cfg.seed ^ data::stream_key(s.id));
    std::uniform_real_distribution<double> u(0.0, cfg.flux_max);
    std::vector<double> flux{0.0};
    while (flux.size() < cfg.finetune_points) {
      const double j = u(frng);
      if (j > 0.0 && std::find(flux.begin(), flux.end(), j) == flux.end()) flux.push_back(j);
    }
    std::sort(flux.begin(), flux.end());
    ft_req.push_back({s.id, s.composition, flux});
  }
  pseudo.noise = true;
  pseudo.noise_model = cfg.noise;
  auto ft = dspm::generate_dataset(ft_req, cfg.shifted, {}, pseudo);
  out.finetune = std::move(ft.samples);
  out.failures.insert(out.failures.end(), ft.failures.begin(), ft.failures.end());
  return out;
}

}  // namespace ionflux::bench
