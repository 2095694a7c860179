// Acceptance run: one PASS/FAIL line per criterion, evidence under the output
// directory (default ./acceptance_out).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionflux/bench/ablation.hpp"
#include "ionflux/bench/baselines.hpp"
#include "ionflux/cli/commands.hpp"
#include "ionflux/cli/log.hpp"
#include "ionflux/dspm/hindrance.hpp"
#include "ionflux/dspm/solver.hpp"
#include "ionflux/model/odenet.hpp"
#include "ionflux/model/projection.hpp"
#include "ionflux/model/rollout.hpp"
#include "ionflux/nn/checkpoint.hpp"
#include "ionflux/ode/tsit5.hpp"
#include "ionflux/util/parallel.hpp"

namespace fs = std::filesystem;
using namespace ionflux;
using ad::NumArray;
using ad::Tape;
using ad::Var;
using data::kNumIons;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int n, bool pass, const std::string& what, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << " [" << n << "] " << what << ": " << detail << std::endl;
}

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double charge_ratio(std::span<const double> h) {
  double q = 0.0, l1 = 0.0;
  for (std::size_t j = 0; j < kNumIons; ++j) {
    q += data::ion_table()[j].valence * h[j];
    l1 += std::abs(h[j]);
  }
  return l1 > 0.0 ? std::abs(q) / l1 : std::abs(q);
}

// 1
void electroneutrality(const fs::path& ckpt_path) {
  const auto t0 = Clock::now();
  const auto trained = nn::load_checkpoint(ckpt_path);
  const auto model = model::make_model(trained.architecture);
  const auto fresh = model->init(99);
  std::mt19937_64 rng(2024);
  std::vector<data::MixtureComposition> comps;
  for (int i = 0; i < 100; ++i) comps.push_back(data::sample_composition(rng));
  std::vector<double> flux;
  for (int i = 0; i <= 20; ++i) flux.push_back(5e-5 * i / 20.0);
  double worst = 0.0;
  std::size_t states = 0;
  for (const auto* params : {&trained.params, &fresh}) {
    for (const auto& c : comps) {
      const auto r = model::rollout(*model, *params, c, flux);
      for (std::size_t i = 0; i < r.conc.rows(); ++i) {
        worst = std::max(worst, charge_ratio(std::span<const double>(r.conc.data() + i * kNumIons, kNumIons)));
        ++states;
      }
    }
  }
  const double t = seconds_since(t0);
  const bool hard = trained.architecture.value("constraint", "") == "hard";
  report(1, hard && worst <= 1e-9 && t < 60.0, "HARD electroneutrality",
         "max |z.h|/|h|_1 = " + num(worst, 3) + " over " + std::to_string(states) +
             " states (100 random compositions x 21 fluxes, trained and fresh parameters), " + num(t, 3) + " s");
}

// 2
void projector() {
  double worst_example = 0.0;
  auto example = [&](std::vector<double> v, std::vector<double> z, std::vector<double> expect) {
    const auto out = model::project_electroneutral(v, z, std::vector<bool>(v.size(), true));
    for (std::size_t i = 0; i < v.size(); ++i) worst_example = std::max(worst_example, std::abs(out[i] - expect[i]));
  };
  example({1, 1}, {1, -1}, {1, 1});
  example({2, 1}, {1, -1}, {1.5, 1.5});
  example({1, 0}, {2, -1}, {0.2, 0.4});

  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::bernoulli_distribution keep(0.6);
  const auto z = model::valence_vector();
  double worst_idem = 0.0;
  for (int n = 0; n < 10000; ++n) {
    std::vector<double> v(kNumIons);
    std::vector<bool> present(kNumIons);
    bool cation = false, anion = false;
    for (std::size_t j = 0; j < kNumIons; ++j) {
      v[j] = g(rng) * 10.0;
      present[j] = keep(rng);
      if (present[j]) (z[j] > 0 ? cation : anion) = true;
    }
    if (!cation && !anion) present[0] = true;
    const auto p = model::project_electroneutral(v, z, present);
    const auto pp = model::project_electroneutral(p, z, present);
    double scale = 0.0;
    for (double x : p) scale = std::max(scale, std::abs(x));
    for (std::size_t j = 0; j < kNumIons; ++j)
      worst_idem = std::max(worst_idem, std::abs(pp[j] - p[j]) / std::max(1.0, scale));
  }
  report(2, worst_example <= 1e-12 && worst_idem <= 1e-12, "projector",
         "hand examples max error " + num(worst_example, 3) + ", idempotence max error " + num(worst_idem, 3) +
             " over 1e4 random vectors");
}

// 3
void autodiff(const fs::path& test_dir) {
  const auto t0 = Clock::now();
  struct Run {
    const char* binary;
    const char* filter;
  };
  const Run runs[] = {{"test_ad", "every op passes the finite-difference check*"},
                      {"test_nn", "attention + MLP stack passes gradient_check"},
                      {"test_bench", "baseline gradients"},
                      {"test_model", "gradient check through the integrator on a two-ion toy"}};
  std::string detail;
  bool ok = true;
  for (const auto& r : runs) {
    const std::string cmd = "\"" + (test_dir / r.binary).string() + "\" -tc=\"" + r.filter + "\" >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const bool pass = status == 0;
    ok = ok && pass;
    detail += std::string(r.binary) + " '" + r.filter + "' " + (pass ? "ok" : "failed") + "; ";
  }
  const double t = seconds_since(t0);
  report(3, ok && t < 120.0, "autodiff gradient checks",
         detail + "ops and stack at tol 1e-5, integrator toy at 1e-4, " + num(t, 3) + " s");
}

// 4
void integrator() {
  Tape t;
  ode::IntegratorConfig cfg;
  cfg.rtol = 1e-8;
  const std::array<double, 2> q{0.0, 1.0};
  const auto tr = ode::integrate([](Var h, double) { return h; }, t.constant(NumArray({1.0})), q, cfg);
  const double exp_err = std::abs(tr.states.back().value()[0] - std::exp(1.0));

  const auto study = ode::order_verification([](Var h, double) { return h; }, NumArray({1.0}), 2.0,
                                             [](double s) { return NumArray({std::exp(s)}); }, 1.0 / 32.0, 2);

  // z.f = 0 for f = P tanh(M h): z.h stays at its initial value 0.
  const std::vector<double> z{1, 1, 1, 2, 2, -1, -2, -1};
  double zz = 0.0;
  for (double v : z) zz += v * v;
  NumArray P(kNumIons, kNumIons), M(kNumIons, kNumIons);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (std::size_t i = 0; i < kNumIons; ++i)
    for (std::size_t j = 0; j < kNumIons; ++j) {
      P(i, j) = (i == j ? 1.0 : 0.0) - z[i] * z[j] / zz;
      M(i, j) = g(rng);
    }
  NumArray h0(kNumIons, 1);
  double zh = 0.0;
  for (std::size_t i = 0; i < kNumIons; ++i) {
    h0[i] = 1.0 + std::abs(g(rng));
    zh += z[i] * h0[i];
  }
  for (std::size_t i = 0; i < kNumIons; ++i) h0[i] -= zh * z[i] / zz;
  Tape t2;
  Var p = t2.constant(P), m = t2.constant(M);
  std::vector<double> qs;
  for (int i = 0; i <= 40; ++i) qs.push_back(0.05 * i);
  const auto inv = ode::integrate([&](Var h, double) { return ad::matmul(p, ad::tanh(ad::matmul(m, h))); },
                                  t2.constant(h0), qs);
  double worst = 0.0;
  for (const auto& s : inv.states) {
    double dot = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < kNumIons; ++i) {
      dot += z[i] * s.value()[i];
      norm += std::abs(s.value()[i]);
    }
    worst = std::max(worst, std::abs(dot) / norm);
  }
  const bool pass = exp_err < 1e-7 && study.observed_order >= 4.7 && study.observed_order <= 5.3 && worst <= 1e-9;
  report(4, pass, "integrator",
         "exponential error " + num(exp_err, 3) + " at rtol 1e-8, observed order " + num(study.observed_order, 4) +
             ", invariant drift " + num(worst, 3));
}

// 5
void pore_model() {
  auto neutrality = [](const dspm::PoreSolution& s, double charge) {
    double worst = 0.0;
    for (std::size_t r = 0; r < s.conc.rows(); ++r) {
      double q = charge, mag = std::abs(charge);
      for (std::size_t j = 0; j < kNumIons; ++j) {
        q += data::ion_table()[j].valence * s.conc(r, j);
        mag += std::abs(data::ion_table()[j].valence) * s.conc(r, j);
      }
      worst = std::max(worst, std::abs(q) / mag);
    }
    double q = 0.0, mag = 0.0;
    for (std::size_t j = 0; j < kNumIons; ++j) {
      q += data::ion_table()[j].valence * s.c_perm[j];
      mag += std::abs(data::ion_table()[j].valence) * s.c_perm[j];
    }
    return std::max(worst, std::abs(q) / mag);
  };
  std::mt19937_64 rng(11);
  double zero_flux = 0.0, neutral = 0.0, doubling = 0.0;
  std::size_t solves = 0;
  dspm::SolverConfig fine;
  fine.slices = 200;
  const dspm::MembraneParams mem{};
  for (int n = 0; n < 25; ++n) {
    const auto c = data::sample_composition(rng);
    const auto s0 = dspm::solve(c, 0.0, mem);
    for (std::size_t j = 0; j < kNumIons; ++j)
      if (c.present[j]) zero_flux = std::max(zero_flux, std::abs(s0.rejection[j]));
    neutral = std::max(neutral, neutrality(s0, mem.charge));
    for (double jv : {1e-5, 3e-5, 5e-5}) {
      const auto s = dspm::solve(c, jv, mem);
      const auto f = dspm::solve(c, jv, mem, fine);
      neutral = std::max({neutral, neutrality(s, mem.charge), neutrality(f, mem.charge)});
      solves += 2;
      for (std::size_t j = 0; j < kNumIons; ++j)
        if (c.present[j] && f.c_perm[j] > 1e-9 * c.max_concentration())
          doubling = std::max(doubling, std::abs(s.c_perm[j] - f.c_perm[j]) / f.c_perm[j]);
    }
  }

  // Uncharged membrane, both ions with one radius and diffusivity: closed form
  // R = 1 - K_c phi / (1 - (1 - K_c phi) exp(-Pe)), Pe = K_c J dx / (K_d D).
  data::IonTable table = data::ion_table();
  for (auto& ion : table) {
    ion.stokes_radius = 0.15e-9;
    ion.diffusivity = 1.2e-9;
  }
  dspm::SolverConfig cfg;
  cfg.ions = table;
  const dspm::MembraneParams neutral_mem{0.43e-9, 1.0e-6, 0.0};
  std::array<double, kNumIons> feed{};
  feed[data::ion_index("K+")] = 10.0;
  feed[data::ion_index("NO3-")] = 10.0;
  const auto salt = data::validate_composition(feed);
  const double lam = 0.15 / 0.43;
  const double phi = (1 - lam) * (1 - lam);
  const double kd = 1 - 2.104 * lam + 2.09 * std::pow(lam, 3) - 0.95 * std::pow(lam, 5);
  const double kc = (2 - phi) * (1 + 0.054 * lam - 0.988 * lam * lam + 0.441 * std::pow(lam, 3));
  double analytic = 0.0;
  for (double jv : {1e-6, 1e-5, 5e-5, 1e-4}) {
    const auto s = dspm::solve(salt, jv, neutral_mem, cfg);
    const double pe = kc * jv * neutral_mem.thickness / (kd * 1.2e-9);
    const double r = 1.0 - kc * phi / (1.0 - (1.0 - kc * phi) * std::exp(-pe));
    analytic = std::max(analytic, std::abs(s.rejection[data::ion_index("K+")] - r) / std::abs(r));
  }
  const bool pass = zero_flux <= 1e-10 && analytic <= 1e-6 && neutral <= 1e-8 && doubling < 1e-3;
  report(5, pass, "pore-model oracle",
         "zero-flux |R| " + num(zero_flux, 3) + ", uncharged salt relative error " + num(analytic, 3) +
             ", neutrality " + num(neutral, 3) + " over " + std::to_string(solves + 25) +
             " solves, grid doubling max change " + num(100.0 * doubling, 3) + "%");
}

struct Cell {
  std::string family, attention, pt, bias;
  std::uint64_t seed = 0;
  std::size_t params = 0;
  double mse = 0.0, violation = 0.0;
  bool ok = false;
};

std::vector<Cell> read_cells(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<Cell> out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    while (f.size() < 12) f.push_back("");
    Cell c{f[0], f[1], f[2], f[3], std::stoull(f[4]), std::stoul(f[5]), std::stod(f[6]), std::stod(f[7]), f[11].empty()};
    out.push_back(c);
  }
  return out;
}

double mean_of(const std::vector<Cell>& cells, const std::string& fam, const std::string& att, const std::string& pt,
               const std::string& bias, std::size_t* n = nullptr) {
  double s = 0.0;
  std::size_t k = 0;
  for (const auto& c : cells)
    if (c.ok && c.family == fam && c.attention == att && c.pt == pt && c.bias == bias) {
      s += c.mse;
      ++k;
    }
  if (n) *n = k;
  return k ? s / static_cast<double>(k) : NAN;
}

// 6, 7, 8
void ablation(const fs::path& dir) {
  const auto cells = read_cells(dir / "ablation_cells.csv");
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  std::map<std::string, double> seconds;
  for (std::size_t i = 0; i < cells.size() && i < manifest["cell_seconds"].size(); ++i)
    seconds[cells[i].family] += manifest["cell_seconds"][i].get<double>();
  std::size_t failed = 0;
  for (const auto& c : cells) failed += c.ok ? 0 : 1;

  // 6: NPT worse than PT for ODENet, every seed of every attention/bias setting.
  bool every = failed == 0;
  std::string detail;
  for (const char* att : {"on", "off"})
    for (const char* bias : {"HIB", "SIB"}) {
      std::size_t worse = 0, seeds = 0;
      for (const auto& a : cells) {
        if (!(a.ok && a.family == "odenet" && a.attention == att && a.bias == bias && a.pt == "PT")) continue;
        for (const auto& b : cells)
          if (b.ok && b.family == "odenet" && b.attention == att && b.bias == bias && b.pt == "NPT" && b.seed == a.seed) {
            ++seeds;
            worse += b.mse > a.mse ? 1 : 0;
          }
      }
      every = every && seeds == 3 && worse == seeds;
      const double ratio = mean_of(cells, "odenet", att, "NPT", bias) / mean_of(cells, "odenet", att, "PT", bias);
      detail += std::string("att ") + att + " " + bias + ": NPT>PT in " + std::to_string(worse) + "/" +
                std::to_string(seeds) + " seeds, mean ratio " + num(ratio, 3) + "x; ";
    }
  const double odenet_seconds = seconds["odenet"];
  report(6, every && odenet_seconds < 600.0, "pre-training ablation direction",
         detail + "reference 1.4x; ODENet cells " + num(odenet_seconds, 3) + " s CPU");

  // 7: HIB no worse than SIB for the default ODENet (attention, pre-trained).
  std::size_t nh = 0, ns = 0;
  const double hib = mean_of(cells, "odenet", "on", "PT", "HIB", &nh);
  const double sib = mean_of(cells, "odenet", "on", "PT", "SIB", &ns);
  double hib_viol = 0.0, sib_viol = INFINITY;
  for (const auto& c : cells) {
    if (!c.ok) continue;
    if (c.bias == "HIB") hib_viol = std::max(hib_viol, c.violation);
    else sib_viol = std::min(sib_viol, c.violation);
  }
  std::string others;
  for (const char* fam : {"odenet", "mlp", "conv", "unet"})
    for (const char* att : {"on", "off"})
      for (const char* pt : {"PT", "NPT"}) {
        const double h = mean_of(cells, fam, att, pt, "HIB"), s = mean_of(cells, fam, att, pt, "SIB");
        if (std::isnan(h) || std::isnan(s)) continue;
        others += std::string(fam) + "/" + att + "/" + pt + " " + num(100.0 * (1.0 - h / s), 3) + "%, ";
      }
  report(7, nh == 3 && ns == 3 && hib <= sib && hib_viol <= 1e-9 && sib_viol > 0.0, "constraint ablation direction",
         "ODENet +att PT: HIB " + num(hib) + " vs SIB " + num(sib) + " (HIB lower by " +
             num(100.0 * (1.0 - hib / sib), 3) + "%, reference 10-20%); HIB violation max " + num(hib_viol, 3) +
             ", SIB violation min " + num(sib_viol, 3) + "; all rows HIB reduction: " + others);

  // 8: attention helps the pre-trained HIB ODENet; every family reported.
  std::size_t na = 0, nb = 0;
  const double with = mean_of(cells, "odenet", "on", "PT", "HIB", &na);
  const double without = mean_of(cells, "odenet", "off", "PT", "HIB", &nb);
  std::string fams;
  for (const char* fam : {"odenet", "mlp", "conv", "unet"})
    for (const char* bias : {"HIB", "SIB"}) {
      const double on = mean_of(cells, fam, "on", "PT", bias), off = mean_of(cells, fam, "off", "PT", bias);
      fams += std::string(fam) + " PT " + bias + " " + num(on) + " vs " + num(off) + (on < off ? " (better)" : " (worse)") +
              ", ";
    }
  report(8, na == 3 && nb == 3 && with < without, "attention ablation direction",
         "ODENet PT HIB with " + num(with) + " vs without " + num(without) + "; with vs without per family: " + fams);
}

// 9
void fairness(const fs::path& dir) {
  bool ok = true;
  std::string detail;
  for (bool att : {true, false}) {
    const double ref = static_cast<double>(bench::odenet_param_count(att));
    detail += std::string(att ? "with" : "without") + " attention ODENet " + num(ref, 6) + ":";
    for (auto f : {bench::Family::Mlp, bench::Family::Conv, bench::Family::Unet}) {
      for (auto c : {model::ConstraintMode::Hard, model::ConstraintMode::Soft}) {
        const auto m = bench::make_cell_model(f, att, c, 1.0);
        const double n = static_cast<double>(nn::count_params(m->init(0)));
        ok = ok && std::abs(n - ref) <= 0.1 * ref;
        if (c == model::ConstraintMode::Hard)
          detail += " " + std::string(bench::family_name(f)) + " " + num(n, 6) + " (" +
                    num(100.0 * (n - ref) / ref, 2) + "%)";
      }
    }
    detail += "; ";
  }
  // The grid that ran used the same counts.
  for (const auto& c : read_cells(dir / "ablation_cells.csv")) {
    const double ref = static_cast<double>(bench::odenet_param_count(c.attention == "on"));
    if (c.ok) ok = ok && std::abs(static_cast<double>(c.params) - ref) <= 0.1 * ref;
  }
  report(9, ok, "parameter matching within 10%", detail);
}

// 10
void determinism(const fs::path& a, const fs::path& b) {
  std::size_t compared = 0;
  std::vector<std::string> diffs;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    if (ext != ".csv" && ext != ".svg") continue;
    const auto rel = fs::relative(e.path(), a);
    ++compared;
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) diffs.push_back(rel.generic_string());
  }
  std::string detail = std::to_string(compared) + " CSV/SVG files compared, " + std::to_string(diffs.size()) + " differ";
  for (std::size_t i = 0; i < diffs.size() && i < 5; ++i) detail += (i ? ", " : ": ") + diffs[i];
  report(10, compared > 0 && diffs.empty(), "repro determinism", detail);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  const fs::path test_dir = fs::absolute(argv[0]).parent_path();
  cli::init_logging(false);
  const std::size_t threads = util::default_threads();
  std::cout << "acceptance: output in " << out << ", " << threads << " thread(s)" << std::endl;

  fs::remove_all(out);
  cli::ReproArgs ra;
  ra.argv = {"acceptance", "repro"};
  ra.threads = threads;
  ra.out = out / "run1";
  const auto t0 = Clock::now();
  cli::CommandResult r1;
  try {
    r1 = cli::cmd_repro(ra);
  } catch (const std::exception& e) {
    std::cout << "FAIL repro: " << e.what() << std::endl;
    return 1;
  }
  const double repro_seconds = seconds_since(t0);
  ra.out = out / "run2";
  try {
    cli::cmd_repro(ra);
  } catch (const std::exception& e) {
    std::cout << "FAIL repro (second run): " << e.what() << std::endl;
    return 1;
  }

  electroneutrality(out / "run1" / "finetune" / "checkpoint.json");
  projector();
  autodiff(test_dir);
  integrator();
  pore_model();
  ablation(out / "run1" / "ablation");
  fairness(out / "run1" / "ablation");
  determinism(out / "run1", out / "run2");
  report(11, repro_seconds < 900.0, "end-to-end budget",
         "default repro took " + num(repro_seconds, 4) + " s on " + std::to_string(threads) +
             " thread(s); budget 900 s on 4 cores");

  const auto& ev = r1.summary["steps"]["evaluate"];
  std::cout << "info: fine-tuned ODENet test MSE " << num(ev.value("mse", NAN)) << ", within 10% band "
            << num(ev.value("band_fraction", NAN)) << "; pore model with nominal membrane MSE "
            << num(ev.value("dspm_nominal_mse", NAN)) << std::endl;
  if (r1.summary["steps"].contains("export-attention"))
    std::cout << "info: showcase lowest rejection "
              << num(r1.summary["steps"]["export-attention"].value("showcase_min_rejection", NAN)) << std::endl;
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
