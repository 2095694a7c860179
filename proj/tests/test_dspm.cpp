#include <doctest.h>

#include <cmath>

#include "ionflux/dspm/generate.hpp"
#include "ionflux/dspm/hindrance.hpp"
#include "ionflux/dspm/solver.hpp"
#include "test_util.hpp"

using namespace ionflux;
using data::ion_index;
using data::kNumIons;

namespace {

data::MixtureComposition mix(std::initializer_list<std::pair<const char*, double>> items) {
  std::array<double, kNumIons> c{};
  for (auto [name, v] : items) c[ion_index(name)] = v;
  return data::validate_composition(c);
}

double pore_neutrality(const dspm::PoreSolution& s, double charge) {
  double worst = 0.0;
  for (std::size_t r = 0; r < s.conc.rows(); ++r) {
    double q = charge, mag = std::abs(charge);
    for (std::size_t j = 0; j < kNumIons; ++j) {
      q += data::ion_table()[j].valence * s.conc(r, j);
      mag += std::abs(data::ion_table()[j].valence) * s.conc(r, j);
    }
    worst = std::max(worst, std::abs(q) / mag);
  }
  return worst;
}

double permeate_neutrality(const dspm::PoreSolution& s) {
  double q = 0.0, mag = 0.0;
  for (std::size_t j = 0; j < kNumIons; ++j) {
    q += data::ion_table()[j].valence * s.c_perm[j];
    mag += std::abs(data::ion_table()[j].valence) * s.c_perm[j];
  }
  return std::abs(q) / mag;
}

}  // namespace

TEST_CASE("hindrance factor examples") {
  const auto h0 = dspm::hindrance_factors(0.0);
  CHECK(h0.phi == 1.0);
  CHECK(h0.k_d == 1.0);
  CHECK(h0.k_c == 1.0);
  CHECK(dspm::hindrance_factors(0.5).phi == 0.25);
  double prev = 2.0;
  for (int i = 0; i <= 95; ++i) {
    const double lam = 0.01 * i;
    const auto h = dspm::hindrance_factors(lam);
    CHECK(h.k_d < prev);
    CHECK(h.k_d > 0.0);
    CHECK(h.k_c > 0.0);
    // Renkin polynomial written out by hand.
    CHECK(h.k_d == doctest::Approx(1 - 2.104 * lam + 2.09 * std::pow(lam, 3) - 0.95 * std::pow(lam, 5)).epsilon(1e-14));
    prev = h.k_d;
  }
  const auto ex = dspm::hindrance_factors(1.2);
  CHECK(ex.phi == 0.0);
}

TEST_CASE("zero flux leaves the feed unchanged") {
  const auto m = mix({{"Na+", 20}, {"Mg2+", 5}, {"Cl-", 20}, {"SO42-", 5}});
  const auto s = dspm::solve(m, 0.0, {});
  for (std::size_t j = 0; j < kNumIons; ++j) {
    CHECK(s.c_perm[j] == m.c_in[j]);
    CHECK(std::abs(s.rejection[j]) <= 1e-10);
  }
  CHECK(pore_neutrality(s, -100.0) <= 1e-8);
}

TEST_CASE("uncharged symmetric salt matches the closed-form hindered transport solution") {
  // Both ions share radius and diffusivity, membrane uncharged.
  data::IonTable table = data::ion_table();
  for (std::size_t j = 0; j < kNumIons; ++j) {
    table[j].stokes_radius = 0.15e-9;
    table[j].diffusivity = 1.2e-9;
  }
  dspm::SolverConfig cfg;
  cfg.ions = table;
  const dspm::MembraneParams mem{0.43e-9, 1.0e-6, 0.0};
  const auto m = mix({{"Na+", 10}, {"Cl-", 10}});

  const double lam = 0.15 / 0.43;
  const double phi = (1 - lam) * (1 - lam);
  const double kd = 1 - 2.104 * lam + 2.09 * std::pow(lam, 3) - 0.95 * std::pow(lam, 5);
  const double kc = (2 - phi) * (1 + 0.054 * lam - 0.988 * lam * lam + 0.441 * std::pow(lam, 3));
  for (double jv : {1e-7, 1e-6, 5e-6, 2e-5, 5e-5, 2e-4}) {
    const auto s = dspm::solve(m, jv, mem, cfg);
    const double pe = kc * jv * mem.thickness / (kd * 1.2e-9);
    const double r_exact = 1.0 - kc * phi / (1.0 - (1.0 - kc * phi) * std::exp(-pe));
    INFO("J_v " << jv);
    CHECK(std::abs(s.rejection[0] - r_exact) <= 1e-6 * std::abs(r_exact));
    CHECK(std::abs(s.rejection[5] - r_exact) <= 1e-6 * std::abs(r_exact));
  }
}

TEST_CASE("converged solutions are electroneutral and satisfy the flux balance") {
  auto g = testutil::rng(17);
  for (int n = 0; n < 30; ++n) {
    const auto m = data::sample_composition(g);
    for (double jv : {2e-6, 2e-5, 5e-5}) {
      const auto s = dspm::solve(m, jv, {});
      INFO("composition " << n << " J_v " << jv);
      CHECK(pore_neutrality(s, -100.0) <= 1e-8);
      CHECK(permeate_neutrality(s) <= 1e-8);
      CHECK(dspm::flux_balance_residual(s, m, {}) <= 1e-8);
      for (double c : s.conc.values()) CHECK(c >= 0.0);
      for (double c : s.c_perm) CHECK(c >= 0.0);
    }
  }
}

TEST_CASE("doubling the slice count changes permeate concentrations by < 0.1%") {
  auto g = testutil::rng(23);
  dspm::SolverConfig fine;
  fine.slices = 200;
  for (int n = 0; n < 20; ++n) {
    const auto m = data::sample_composition(g);
    const auto a = dspm::solve(m, 3e-5, {});
    const auto b = dspm::solve(m, 3e-5, {}, fine);
    for (std::size_t j = 0; j < kNumIons; ++j) {
      if (!m.present[j]) continue;
      CHECK(std::abs(a.c_perm[j] - b.c_perm[j]) <= 1e-3 * std::abs(b.c_perm[j]) + 1e-12 * m.max_concentration());
    }
  }
}

TEST_CASE("sterically excluded sulfate") {
  const auto m = mix({{"Na+", 30}, {"Cl-", 10}, {"SO42-", 10}});
  double prev = -1.0;
  for (double rp : {0.6e-9, 0.45e-9, 0.35e-9, 0.28e-9, 0.24e-9, 0.231e-9, 0.22e-9}) {
    const dspm::MembraneParams mem{rp, 1e-6, -100.0};
    const auto s = dspm::solve(m, 2e-5, mem);
    INFO("r_p " << rp);
    CHECK(s.rejection[6] >= prev);
    prev = s.rejection[6];
    CHECK(permeate_neutrality(s) <= 1e-8);
  }
  const auto s = dspm::solve(m, 2e-5, {0.22e-9, 1e-6, -100.0});
  CHECK(s.rejection[6] == 1.0);
  CHECK(s.c_perm[6] == 0.0);
  // Sodium leaves with chloride only.
  CHECK(s.c_perm[0] == doctest::Approx(s.c_perm[5]).epsilon(1e-9));
}

TEST_CASE("generate_dataset") {
  const auto m = mix({{"Na+", 10}, {"Cl-", 10}});
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(5e-6 * i);
  const std::vector<dspm::SampleRequest> req{{"nacl", m, grid}};
  const auto a = dspm::generate_dataset(req, {});
  REQUIRE(a.samples.size() == 1);
  CHECK(a.failures.empty());
  const auto& s = a.samples[0];
  CHECK(s.conc.rows() == 10);
  const auto R = s.rejection();
  CHECK(R(0, 0) == 0.0);
  CHECK(R(0, 5) == 0.0);
  for (std::size_t i = 1; i < 10; ++i) CHECK(R(i, 0) >= R(i - 1, 0));
  const auto b = dspm::generate_dataset(req, {});
  CHECK(a.samples[0] == b.samples[0]);

  // Threads do not change the output.
  auto g = testutil::rng(2);
  std::vector<dspm::SampleRequest> many;
  for (int i = 0; i < 8; ++i) many.push_back({"m" + std::to_string(i), data::sample_composition(g), grid});
  dspm::GenerateOptions opts;
  const auto serial = dspm::generate_dataset(many, {}, {}, opts);
  opts.threads = 3;
  const auto threaded = dspm::generate_dataset(many, {}, {}, opts);
  CHECK(serial.samples == threaded.samples);

  // An invalid flux grid is recorded and skipped.
  const std::vector<dspm::SampleRequest> bad{{"bad", m, {0.0, 1e-5, 5e-6}}};
  const auto c = dspm::generate_dataset(bad, {});
  CHECK(c.samples.empty());
  CHECK(c.failures.size() == 1);
}

TEST_CASE("solver errors") {
  const auto m = mix({{"Na+", 10}, {"Cl-", 10}});
  CHECK_THROWS_AS(dspm::solve(m, -1e-6, {}), std::invalid_argument);
  dspm::SolverConfig cfg;
  cfg.max_iterations = 0;
  cfg.tol = 1e-300;
  CHECK_THROWS_AS(dspm::solve(m, 1e-5, {}, cfg), dspm::SolverError);
  // Chloride excluded too: no anion can enter the pore.
  CHECK_THROWS_AS(dspm::solve(mix({{"Mg2+", 5}, {"SO42-", 5}}), 1e-5, {0.2e-9, 1e-6, -100}), dspm::SolverError);
}
