#include "ionflux/cli/commands.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "ionflux/bench/evaluate.hpp"
#include "ionflux/cli/log.hpp"
#include "ionflux/cli/svg.hpp"
#include "ionflux/data/noise.hpp"
#include "ionflux/dspm/generate.hpp"
#include "ionflux/model/rollout.hpp"
#include "ionflux/model/train.hpp"
#include "ionflux/nn/checkpoint.hpp"
#include "ionflux/util/format.hpp"
#include "ionflux/util/parallel.hpp"

namespace ionflux::cli {

using util::fmt;
using Clock = std::chrono::steady_clock;

namespace {

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw std::invalid_argument(std::string("missing ") + what);
  if (!fs::exists(p)) throw std::runtime_error(std::string(what) + " not found: " + p.string());
}

std::vector<data::RolloutSample> load_samples(const fs::path& path, std::vector<std::string>& warnings) {
  require_file(path, "dataset");
  std::vector<std::string> w;
  auto samples = data::ingest_csv(path, &w);
  for (auto& m : w) {
    log_warn(path.filename().string() + ": " + m);
    warnings.push_back(path.filename().string() + ": " + m);
  }
  if (samples.empty()) throw std::runtime_error("no samples in " + path.string());
  return samples;
}

nlohmann::json integrator_json(const ode::IntegratorConfig& c) {
  return {{"rtol", c.rtol}, {"atol", c.atol}, {"max_steps", c.max_steps}};
}

ode::IntegratorConfig training_integrator(const TrainingSettings& t) {
  ode::IntegratorConfig c;
  c.rtol = t.train_rtol;
  c.atol = t.train_rtol * 1e-2;
  return c;
}

std::string ion_name(std::size_t j) { return std::string(data::ion_table()[j].name); }

std::string rejection_svg(const model::RolloutPrediction& pred, const data::RolloutSample* truth) {
  std::vector<svg::Series> series;
  for (std::size_t j = 0; j < data::kNumIons; ++j) {
    if (!pred.composition.present[j]) continue;
    svg::Series s;
    s.label = ion_name(j);
    s.colour = static_cast<int>(j);
    for (std::size_t i = 0; i < pred.flux.size(); ++i) {
      s.x.push_back(pred.flux[i]);
      s.y.push_back(pred.rejection(i, j));
    }
    series.push_back(std::move(s));
    if (truth) {
      const auto r = truth->rejection();
      svg::Series t;
      t.label = ion_name(j) + " (true)";
      t.colour = static_cast<int>(j);
      t.dashed = true;
      for (std::size_t i = 0; i < truth->points(); ++i) {
        t.x.push_back(truth->flux[i]);
        t.y.push_back(r(i, j));
      }
      series.push_back(std::move(t));
    }
  }
  return svg::line_plot("rejection " + pred.sample_id, "J_v (m/s)", "rejection", series);
}

std::string safe_name(const std::string& id) {
  std::string s = id;
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

void write_loss_outputs(const fs::path& dir, const std::string& stem, const model::TrainResult& r,
                        CommandResult& res) {
  std::ostringstream csv;
  csv << "epoch,data_loss,penalty,total\n";
  svg::Series s;
  s.label = "total";
  for (const auto& e : r.history) {
    csv << e.epoch << ',' << fmt(e.data_loss) << ',' << fmt(e.penalty) << ',' << fmt(e.total) << '\n';
    s.x.push_back(static_cast<double>(e.epoch));
    s.y.push_back(e.total);
  }
  write_text(dir / (stem + "_loss.csv"), csv.str());
  write_text(dir / (stem + "_loss.svg"), svg::line_plot(stem + " loss", "epoch", "loss", {s}));
  res.outputs.push_back(dir / (stem + "_loss.csv"));
  res.outputs.push_back(dir / (stem + "_loss.svg"));
}

std::string attention_csv(const std::vector<double>& m) {
  std::ostringstream o;
  o << "ion";
  for (std::size_t j = 0; j < data::kNumIons; ++j) o << ',' << ion_name(j);
  o << '\n';
  for (std::size_t i = 0; i < data::kNumIons; ++i) {
    o << ion_name(i);
    for (std::size_t j = 0; j < data::kNumIons; ++j) o << ',' << fmt(m[i * data::kNumIons + j]);
    o << '\n';
  }
  return o.str();
}

std::vector<std::string> ion_labels() {
  std::vector<std::string> l;
  for (std::size_t j = 0; j < data::kNumIons; ++j) l.push_back(ion_name(j));
  return l;
}

const char* pt_name(bool pt) { return pt ? "PT" : "NPT"; }
const char* ib_name(model::ConstraintMode c) { return c == model::ConstraintMode::Hard ? "HIB" : "SIB"; }

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

json RunConfig::to_json() const {
  return {{"schema_version", kSchemaVersion},
          {"benchmark", benchmark.to_json()},
          {"model", model.to_json()},
          {"training",
           {{"pretrain_epochs", training.pretrain_epochs},
            {"finetune_epochs", training.finetune_epochs},
            {"batch_size", training.batch_size},
            {"lr", training.lr},
            {"train_rtol", training.train_rtol}}},
          {"ablation", ablation.to_json()},
          {"showcase", showcase}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  if (j.contains("benchmark")) c.benchmark = bench::BenchmarkConfig::from_json(j.at("benchmark"));
  if (j.contains("model")) c.model = model::ODENetConfig::from_json(j.at("model"));
  if (j.contains("training")) {
    const auto& t = j.at("training");
    c.training.pretrain_epochs = t.value("pretrain_epochs", c.training.pretrain_epochs);
    c.training.finetune_epochs = t.value("finetune_epochs", c.training.finetune_epochs);
    c.training.batch_size = t.value("batch_size", c.training.batch_size);
    c.training.lr = t.value("lr", c.training.lr);
    c.training.train_rtol = t.value("train_rtol", c.training.train_rtol);
  }
  if (j.contains("ablation")) c.ablation = bench::AblationConfig::from_json(j.at("ablation"));
  c.showcase = j.value("showcase", c.showcase);
  return c;
}

json read_json(const fs::path& path) {
  require_file(path, "config");
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion) {
    throw std::runtime_error(path.string() + ": unsupported schema_version " + j.at("schema_version").dump());
  }
  return j;
}

RunConfig load_run_config(const fs::path& path) {
  if (path.empty()) return {};
  return RunConfig::from_json(read_json(path));
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const json& config) { return fnv1a_hex(config.dump()); }

data::MixtureComposition parse_composition(const std::string& text) {
  std::array<double, data::kNumIons> c{};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("composition item '" + item + "' needs ion=value");
    c[data::ion_index(item.substr(0, eq))] = std::stod(item.substr(eq + 1));
  }
  return data::validate_composition(c);
}

void Manifest::write(const fs::path& dir) const {
  json j;
  j["command"] = command;
  j["argv"] = argv;
  j["version"] = kVersion;
  j["config"] = config;
  j["config_hash"] = config_hash(config);
  j["seeds"] = seeds;
  json in = json::array();
  for (const auto& p : inputs) {
    json e{{"path", p.string()}};
    if (fs::is_regular_file(p)) e["fnv1a"] = fnv1a_hex(slurp(p));
    in.push_back(e);
  }
  j["inputs"] = in;
  json out = json::array();
  for (const auto& p : outputs) out.push_back(fs::relative(p, dir).generic_string());
  j["outputs"] = out;
  j["warnings"] = warnings;
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  j["timings"] = {{"seconds", seconds}, {"finished_utc", now_utc()}};
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

CommandResult cmd_simulate(const SimulateArgs& a) {
  const auto t0 = Clock::now();
  if (a.out.empty()) throw std::invalid_argument("simulate: --out is required");
  const json raw = a.config.empty() ? json::object() : read_json(a.config);
  CommandResult res;
  Manifest m;
  m.command = "simulate";
  m.argv = a.argv;
  if (!a.config.empty()) m.inputs.push_back(a.config);

  if (raw.contains("compositions") || raw.contains("random_compositions")) {
    dspm::MembraneParams membrane;
    if (raw.contains("membrane")) {
      const auto& mj = raw.at("membrane");
      membrane.pore_radius = mj.value("pore_radius", membrane.pore_radius);
      membrane.thickness = mj.value("thickness", membrane.thickness);
      membrane.charge = mj.value("charge", membrane.charge);
    }
    dspm::SolverConfig solver;
    solver.slices = raw.value("slices", solver.slices);
    std::vector<double> flux;
    if (raw.contains("flux")) {
      flux = raw.at("flux").get<std::vector<double>>();
    } else {
      flux = bench::uniform_grid(raw.value("flux_points", std::size_t{11}), raw.value("flux_max", 5e-5));
    }
    const std::uint64_t seed = a.seed.value_or(raw.value("seed", std::uint64_t{0}));
    std::vector<dspm::SampleRequest> req;
    if (raw.contains("compositions")) {
      std::size_t k = 0;
      for (const auto& cj : raw.at("compositions")) {
        std::array<double, data::kNumIons> c{};
        for (auto it = cj.at("c").begin(); it != cj.at("c").end(); ++it) c[data::ion_index(it.key())] = it.value();
        req.push_back({cj.value("id", "sample-" + std::to_string(k++)), data::validate_composition(c), flux});
      }
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < raw.value("random_compositions", std::size_t{0}); ++i)
      req.push_back({"random-" + std::to_string(i), data::sample_composition(rng), flux});
    dspm::GenerateOptions opts;
    opts.threads = a.threads;
    opts.provenance = data::parse_provenance(raw.value("provenance", std::string("SIMULATED")));
    opts.noise = raw.value("noise", false);
    if (raw.contains("noise_model")) {
      opts.noise_model.rel = raw.at("noise_model").value("rel", opts.noise_model.rel);
      opts.noise_model.abs_frac = raw.at("noise_model").value("abs_frac", opts.noise_model.abs_frac);
    }
    auto gen = dspm::generate_dataset(req, membrane, solver, opts);
    for (const auto& f : gen.failures) {
      log_warn("solver failure: " + f);
      res.warnings.push_back("solver failure: " + f);
    }
    data::write_dataset_csv(a.out / "dataset.csv", gen.samples);
    res.outputs.push_back(a.out / "dataset.csv");
    m.config = raw;
    m.config["seed"] = seed;
    m.seeds = {seed};
    res.summary = {{"samples", gen.samples.size()}, {"failures", gen.failures.size()}};
    log_info("simulated " + std::to_string(gen.samples.size()) + " samples");
  } else {
    RunConfig cfg = RunConfig::from_json(raw);
    if (a.seed) cfg.benchmark.seed = *a.seed;
    cfg.benchmark.threads = a.threads;
    log_info("generating benchmark data");
    const auto data = bench::make_benchmark_data(cfg.benchmark);
    for (const auto& f : data.failures) {
      log_warn("solver failure: " + f);
      res.warnings.push_back("solver failure: " + f);
    }
    data::write_dataset_csv(a.out / "pretrain.csv", data.pretrain);
    data::write_dataset_csv(a.out / "finetune.csv", data.finetune);
    data::write_dataset_csv(a.out / "test.csv", data.test);
    res.outputs = {a.out / "pretrain.csv", a.out / "finetune.csv", a.out / "test.csv"};
    m.config = cfg.benchmark.to_json();
    m.seeds = {cfg.benchmark.seed};
    res.summary = {{"pretrain", data.pretrain.size()},
                   {"finetune", data.finetune.size()},
                   {"test", data.test.size()},
                   {"failures", data.failures.size()}};
    log_info("benchmark: " + std::to_string(data.pretrain.size()) + " pretrain, " +
             std::to_string(data.finetune.size()) + " finetune, " + std::to_string(data.test.size()) + " test");
  }
  m.outputs = res.outputs;
  m.warnings = res.warnings;
  m.extra["summary"] = res.summary;
  m.seconds = since(t0);
  m.write(a.out);
  return res;
}

namespace {

CommandResult run_training(const TrainArgs& a, model::Stage stage) {
  const auto t0 = Clock::now();
  const bool pre = stage == model::Stage::Pretrain;
  const char* name = pre ? "pretrain" : "finetune";
  if (a.ckpt_out.empty()) throw std::invalid_argument(std::string(name) + ": --ckpt-out is required");
  const RunConfig cfg = load_run_config(a.config);
  CommandResult res;
  auto samples = load_samples(a.data, res.warnings);

  nn::Checkpoint ckpt;
  std::vector<fs::path> inputs{a.data};
  if (!a.config.empty()) inputs.push_back(a.config);
  if (pre || a.ckpt_in.empty()) {
    if (!pre && !a.allow_npt) {
      throw model::StageError("finetune: --ckpt-in is required (or --allow-npt to fine-tune from scratch)");
    }
    if (!a.ckpt_in.empty()) {
      require_file(a.ckpt_in, "checkpoint");
      ckpt = nn::load_checkpoint(a.ckpt_in);
      inputs.push_back(a.ckpt_in);
    } else {
      std::unique_ptr<model::Model> fresh;
      const std::string family = a.family.value_or("odenet");
      auto constraint = a.constraint ? model::parse_constraint(*a.constraint) : cfg.model.constraint;
      const double lambda = a.lambda.value_or(cfg.model.soft_weight);
      if (family == "odenet") {
        model::ODENetConfig mc = cfg.model;
        mc.constraint = constraint;
        mc.soft_weight = lambda;
        if (a.attention) mc.attention = *a.attention;
        fresh = std::make_unique<model::ODENet>(mc);
      } else {
        fresh = bench::make_cell_model(bench::parse_family(family), a.attention.value_or(true), constraint, lambda,
                                       cfg.ablation.param_tolerance);
      }
      ckpt = model::initial_checkpoint(*fresh, a.seed);
    }
  } else {
    require_file(a.ckpt_in, "checkpoint");
    ckpt = nn::load_checkpoint(a.ckpt_in);
    inputs.push_back(a.ckpt_in);
  }
  if (a.constraint) ckpt.architecture["constraint"] = *a.constraint;
  if (a.lambda) ckpt.architecture["lambda"] = *a.lambda;
  model::make_model(ckpt.architecture);  // validates the architecture before training

  model::TrainOptions opts;
  opts.stage = stage;
  opts.epochs = a.epochs.value_or(pre ? cfg.training.pretrain_epochs : cfg.training.finetune_epochs);
  opts.batch_size = cfg.training.batch_size;
  opts.adam.lr = cfg.training.lr;
  opts.seed = a.seed;
  opts.threads = a.threads;
  opts.allow_npt = a.allow_npt;
  opts.integrator = training_integrator(cfg.training);
  log_info(std::string(name) + ": " + std::to_string(samples.size()) + " samples, " + std::to_string(opts.epochs) +
           " epochs");
  auto r = model::train(ckpt, samples, opts);
  if (r.aborted) {
    log_error(std::string(name) + " aborted: " + r.abort_reason);
    res.warnings.push_back("training aborted: " + r.abort_reason);
    res.summary["failed"] = true;
  }
  if (r.clamped_targets > 0) {
    res.warnings.push_back(std::to_string(r.clamped_targets) + " noisy targets clamped at 0");
  }
  nn::save_checkpoint(a.ckpt_out, r.checkpoint);
  const fs::path dir = a.ckpt_out.has_parent_path() ? a.ckpt_out.parent_path() : fs::path(".");
  res.outputs = {a.ckpt_out, fs::path(a.ckpt_out.string() + ".bin")};
  write_loss_outputs(dir, name, r, res);

  res.summary["epochs"] = r.history.size();
  if (!r.history.empty()) {
    res.summary["initial_loss"] = r.history.front().total;
    res.summary["final_loss"] = r.history.back().total;
  }
  res.summary["loss_trend_decreasing"] = r.loss_trend_decreasing;

  Manifest m;
  m.command = name;
  m.argv = a.argv;
  m.config = {{"stage", name},
              {"architecture", r.checkpoint.architecture},
              {"epochs", opts.epochs},
              {"batch_size", opts.batch_size},
              {"lr", opts.adam.lr},
              {"seed", a.seed},
              {"allow_npt", a.allow_npt},
              {"integrator", integrator_json(*opts.integrator)}};
  m.seeds = r.checkpoint.seeds;
  m.inputs = inputs;
  m.outputs = res.outputs;
  m.warnings = res.warnings;
  m.extra["frozen"] = r.frozen;
  m.extra["summary"] = res.summary;
  m.seconds = since(t0);
  m.write(dir);
  return res;
}

}  // namespace

CommandResult cmd_pretrain(const TrainArgs& a) { return run_training(a, model::Stage::Pretrain); }
CommandResult cmd_finetune(const TrainArgs& a) { return run_training(a, model::Stage::Finetune); }

CommandResult cmd_evaluate(const EvaluateArgs& a) {
  const auto t0 = Clock::now();
  if (a.out.empty()) throw std::invalid_argument("evaluate: --out is required");
  require_file(a.ckpt, "checkpoint");
  const RunConfig cfg = load_run_config(a.config);
  CommandResult res;
  const auto test = load_samples(a.data, res.warnings);
  const auto ckpt = nn::load_checkpoint(a.ckpt);
  const auto model = model::make_model(ckpt.architecture);
  log_info("evaluating " + model->family() + " on " + std::to_string(test.size()) + " samples");

  const auto metrics = bench::evaluate(*model, ckpt.params, test, a.threads);
  std::ostringstream table;
  table << "model,mse,band_fraction,max_violation\n";
  table << model->family() << ',' << fmt(metrics.mse) << ',' << fmt(metrics.band_fraction) << ','
        << fmt(metrics.max_violation) << '\n';
  std::optional<bench::EvalMetrics> pore;
  if (a.dspm) {
    pore = bench::evaluate_dspm(test, cfg.benchmark.nominal, a.threads);
    table << "dspm-nominal," << fmt(pore->mse) << ',' << fmt(pore->band_fraction) << ','
          << fmt(pore->max_violation) << '\n';
  }
  write_text(a.out / "metrics.csv", table.str());
  res.outputs.push_back(a.out / "metrics.csv");

  std::ostringstream rej;
  rej << "ion,model" << (pore ? ",dspm-nominal" : "") << '\n';
  for (std::size_t j = 0; j < data::kNumIons; ++j) {
    rej << ion_name(j) << ',' << fmt(metrics.rejection_mae[j]);
    if (pore) rej << ',' << fmt(pore->rejection_mae[j]);
    rej << '\n';
  }
  write_text(a.out / "rejection_mae.csv", rej.str());
  res.outputs.push_back(a.out / "rejection_mae.csv");

  bench::write_parity_csv(a.out / "parity.csv", metrics);
  std::vector<double> truth, pred;
  for (const auto& p : metrics.parity) {
    truth.push_back(p.c_true);
    pred.push_back(p.c_pred);
  }
  write_text(a.out / "parity.svg", svg::parity_plot("permeate concentration (mol/m^3)", truth, pred, 0.1));
  res.outputs.push_back(a.out / "parity.csv");
  res.outputs.push_back(a.out / "parity.svg");

  std::vector<model::RolloutPrediction> preds(test.size());
  util::parallel_for(test.size(), a.threads, [&](std::size_t i) {
    preds[i] = model::rollout(*model, ckpt.params, test[i].composition, test[i].flux, test[i].id);
  });
  model::write_rollout_csv(a.out / "rollouts.csv", preds);
  res.outputs.push_back(a.out / "rollouts.csv");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const fs::path p = a.out / "rollouts" / ("rejection_" + safe_name(preds[i].sample_id) + ".svg");
    write_text(p, rejection_svg(preds[i], &test[i]));
    res.outputs.push_back(p);
  }

  res.summary = {{"mse", metrics.mse},
                 {"band_fraction", metrics.band_fraction},
                 {"max_violation", metrics.max_violation},
                 {"parity_points", metrics.parity.size()}};
  if (pore) res.summary["dspm_nominal_mse"] = pore->mse;
  log_info("test mse " + fmt(metrics.mse) + ", within 10%: " + fmt(metrics.band_fraction));

  Manifest m;
  m.command = "evaluate";
  m.argv = a.argv;
  m.config = {{"architecture", ckpt.architecture}, {"dspm", a.dspm}};
  if (a.dspm) m.config["dspm_membrane"] = cfg.benchmark.to_json().at("nominal_membrane");
  m.seeds = ckpt.seeds;
  m.inputs = {a.ckpt, a.data};
  if (!a.config.empty()) m.inputs.push_back(a.config);
  m.outputs = res.outputs;
  m.warnings = res.warnings;
  m.extra["summary"] = res.summary;
  m.seconds = since(t0);
  m.write(a.out);
  return res;
}

json ablation_findings(const bench::AblationResult& r, const bench::AblationConfig& cfg) {
  using bench::Family;
  using model::ConstraintMode;
  json out;
  const auto mean = [&](Family f, bool att, bool pt, ConstraintMode c) -> json {
    const auto* row = r.find(f, att, pt, c);
    if (!row || row->runs == 0) return nullptr;
    return row->mse_mean;
  };
  const bool has_odenet = std::find(cfg.families.begin(), cfg.families.end(), Family::ODENet) != cfg.families.end();

  // Pre-training: NPT against PT for every ODENet configuration and seed.
  json pt = json::array();
  bool every_seed = has_odenet;
  for (bool att : cfg.attention)
    for (auto c : {ConstraintMode::Hard, ConstraintMode::Soft}) {
      if (!has_odenet) break;
      json e{{"attention", att}, {"bias", ib_name(c)}};
      json seeds = json::array();
      for (auto s : cfg.seeds) {
        const auto* a = r.cell(Family::ODENet, att, true, c, s);
        const auto* b = r.cell(Family::ODENet, att, false, c, s);
        if (!a || !b) {
          every_seed = false;
          seeds.push_back({{"seed", s}, {"error", "missing cell"}});
          continue;
        }
        const bool worse = b->test_mse > a->test_mse;
        every_seed = every_seed && worse;
        seeds.push_back({{"seed", s}, {"pt", a->test_mse}, {"npt", b->test_mse}, {"ratio", b->test_mse / a->test_mse}});
      }
      e["seeds"] = seeds;
      const json m_pt = mean(Family::ODENet, att, true, c), m_npt = mean(Family::ODENet, att, false, c);
      if (!m_pt.is_null() && !m_npt.is_null()) e["mean_ratio"] = m_npt.get<double>() / m_pt.get<double>();
      pt.push_back(e);
    }
  out["pretraining"] = {{"odenet", pt}, {"npt_worse_every_seed", every_seed}, {"reference_ratio", 1.4}};

  // Constraint: HIB against SIB for every family, attention and PT/NPT setting.
  json ib = json::array();
  for (auto f : cfg.families)
    for (bool att : cfg.attention)
      for (bool p : {true, false}) {
        const json h = mean(f, att, p, ConstraintMode::Hard), s = mean(f, att, p, ConstraintMode::Soft);
        if (h.is_null() || s.is_null()) continue;
        ib.push_back({{"family", bench::family_name(f)},
                      {"attention", att},
                      {"pretraining", pt_name(p)},
                      {"hib", h},
                      {"sib", s},
                      {"reduction", 1.0 - h.get<double>() / s.get<double>()}});
      }
  double hib_max = 0.0, sib_min = INFINITY;
  std::size_t hib_n = 0, sib_n = 0;
  for (const auto& c : r.cells) {
    if (!c.error.empty()) continue;
    if (c.constraint == ConstraintMode::Hard) {
      hib_max = std::max(hib_max, c.violation);
      ++hib_n;
    } else {
      sib_min = std::min(sib_min, c.violation);
      ++sib_n;
    }
  }
  json primary = nullptr;
  for (const auto& e : ib)
    if (e["family"] == "odenet" && e["attention"] == true && e["pretraining"] == "PT") primary = e;
  out["constraint"] = {{"rows", ib},
                       {"odenet", primary},
                       {"hib_violation_max", hib_n ? json(hib_max) : json(nullptr)},
                       {"sib_violation_min", sib_n ? json(sib_min) : json(nullptr)},
                       {"reference_reduction", {0.1, 0.2}}};

  // Attention: on against off, pre-trained, HIB and SIB, every family.
  json at = json::array();
  for (auto f : cfg.families)
    for (auto c : {ConstraintMode::Hard, ConstraintMode::Soft}) {
      const json on = mean(f, true, true, c), off = mean(f, false, true, c);
      if (on.is_null() || off.is_null()) continue;
      at.push_back({{"family", bench::family_name(f)},
                    {"bias", ib_name(c)},
                    {"with", on},
                    {"without", off},
                    {"improvement", 1.0 - on.get<double>() / off.get<double>()}});
    }
  out["attention"] = at;
  std::size_t failed = 0;
  for (const auto& c : r.cells) failed += c.error.empty() ? 0 : 1;
  out["failed_cells"] = failed;
  return out;
}

CommandResult cmd_ablate(const AblateArgs& a) {
  const auto t0 = Clock::now();
  if (a.out.empty()) throw std::invalid_argument("ablate: --out is required");
  RunConfig cfg = load_run_config(a.config);
  if (a.seed) cfg.benchmark.seed = *a.seed;
  cfg.benchmark.threads = a.threads;
  cfg.ablation.threads = a.threads;
  CommandResult res;
  bench::BenchmarkData data;
  std::vector<fs::path> inputs;
  if (!a.config.empty()) inputs.push_back(a.config);
  if (a.data_dir.empty()) {
    log_info("generating benchmark data");
    data = bench::make_benchmark_data(cfg.benchmark);
    for (const auto& f : data.failures) res.warnings.push_back("solver failure: " + f);
  } else {
    data.pretrain = load_samples(a.data_dir / "pretrain.csv", res.warnings);
    data.finetune = load_samples(a.data_dir / "finetune.csv", res.warnings);
    data.test = load_samples(a.data_dir / "test.csv", res.warnings);
    inputs.insert(inputs.end(), {a.data_dir / "pretrain.csv", a.data_dir / "finetune.csv", a.data_dir / "test.csv"});
  }
  log_info("ablation over " + std::to_string(cfg.ablation.families.size()) + " families, " +
           std::to_string(cfg.ablation.seeds.size()) + " seeds");
  const auto r = bench::run_ablation(cfg.ablation, data);
  for (const auto& c : r.cells) {
    if (c.error.empty()) continue;
    const std::string w = std::string("partial grid: ") + std::string(bench::family_name(c.family)) +
                          (c.attention ? " +att " : " -att ") + pt_name(c.pretrained) + ' ' + ib_name(c.constraint) +
                          " seed " + std::to_string(c.seed) + ": " + c.error;
    log_warn(w);
    res.warnings.push_back(w);
  }
  bench::write_ablation_cells_csv(a.out / "ablation_cells.csv", r);
  bench::write_ablation_summary_csv(a.out / "ablation_summary.csv", r);
  std::vector<svg::Bar> bars;
  for (const auto& row : r.rows) {
    if (row.runs == 0) continue;
    bars.push_back({std::string(bench::family_name(row.family)) + (row.attention ? " +att " : " -att ") +
                        pt_name(row.pretrained) + ' ' + ib_name(row.constraint),
                    row.mse_mean, row.mse_std, std::string(bench::family_name(row.family))});
  }
  write_text(a.out / "ablation.svg", svg::bar_chart("test MSE, mean and std over seeds", "MSE", bars));

  const json cfg_json = {{"benchmark", cfg.benchmark.to_json()}, {"ablation", cfg.ablation.to_json()}};
  res.summary = ablation_findings(r, cfg.ablation);
  json summary = {{"config_hash", config_hash(cfg_json)}, {"version", kVersion}, {"seeds", cfg.ablation.seeds},
                  {"findings", res.summary}};
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"family", bench::family_name(row.family)},
                    {"attention", row.attention},
                    {"pretraining", pt_name(row.pretrained)},
                    {"bias", ib_name(row.constraint)},
                    {"params", row.params},
                    {"runs", row.runs},
                    {"mse_mean", row.mse_mean},
                    {"mse_std", row.mse_std},
                    {"violation_min", row.violation_min},
                    {"violation_max", row.violation_max}});
  summary["rows"] = rows;
  write_text(a.out / "ablation_summary.json", summary.dump(2) + "\n");
  res.outputs = {a.out / "ablation_cells.csv", a.out / "ablation_summary.csv", a.out / "ablation.svg",
                 a.out / "ablation_summary.json"};

  Manifest m;
  m.command = "ablate";
  m.argv = a.argv;
  m.config = cfg_json;
  m.seeds = cfg.ablation.seeds;
  m.inputs = inputs;
  m.outputs = res.outputs;
  m.warnings = res.warnings;
  json cell_seconds = json::array();
  for (const auto& c : r.cells) cell_seconds.push_back(c.seconds);
  m.extra["cell_seconds"] = cell_seconds;
  m.seconds = since(t0);
  m.write(a.out);
  log_info("ablation finished in " + fmt(std::round(r.seconds)) + " s");
  return res;
}

CommandResult cmd_export_attention(const AttentionArgs& a) {
  const auto t0 = Clock::now();
  if (a.out.empty()) throw std::invalid_argument("export-attention: --out is required");
  require_file(a.ckpt, "checkpoint");
  CommandResult res;
  const auto ckpt = nn::load_checkpoint(a.ckpt);
  const auto model = model::make_model(ckpt.architecture);
  if (!ckpt.architecture.value("attention", false)) throw std::runtime_error("checkpoint has no attention block");
  std::vector<fs::path> inputs{a.ckpt};

  std::vector<data::RolloutSample> samples;
  if (!a.data.empty()) {
    samples = load_samples(a.data, res.warnings);
    inputs.push_back(a.data);
    if (a.sample) {
      std::erase_if(samples, [&](const data::RolloutSample& s) { return s.id != *a.sample; });
      if (samples.empty()) throw std::runtime_error("sample " + *a.sample + " not in " + a.data.string());
    }
  } else if (a.sample) {
    throw std::invalid_argument("export-attention: --sample needs --data");
  }
  const std::size_t d = data::kNumIons;
  std::vector<model::RolloutPrediction> preds(samples.size());
  util::parallel_for(samples.size(), a.threads, [&](std::size_t i) {
    preds[i] = model::rollout(*model, ckpt.params, samples[i].composition, samples[i].flux, samples[i].id);
  });
  if (!preds.empty()) {
    // Row i averages over samples containing ion i, so present rows keep unit sums.
    std::vector<double> mean(d * d, 0.0);
    std::vector<std::size_t> count(d, 0);
    for (const auto& p : preds)
      for (std::size_t i = 0; i < d; ++i) {
        if (!p.composition.present[i]) continue;
        ++count[i];
        for (std::size_t j = 0; j < d; ++j) mean[i * d + j] += p.attention(i, j);
      }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (count[i]) mean[i * d + j] /= static_cast<double>(count[i]);
    const std::string title = a.sample ? "attention " + *a.sample : "mean attention over " + std::to_string(preds.size()) + " samples";
    write_text(a.out / "attention.csv", attention_csv(mean));
    write_text(a.out / "attention.svg", svg::heatmap(title, ion_labels(), mean));
    model::write_attention_json(a.out / "attention_samples.json", preds);
    res.outputs = {a.out / "attention.csv", a.out / "attention.svg", a.out / "attention_samples.json"};
  }
  if (a.composition) {
    const auto comp = parse_composition(*a.composition);
    const auto flux = bench::uniform_grid(21, model->normalization().flux_scale);
    const auto p = model::rollout(*model, ckpt.params, comp, flux, "showcase");
    std::vector<double> m(d * d);
    for (std::size_t i = 0; i < d * d; ++i) m[i] = p.attention[i];
    write_text(a.out / "showcase_attention.csv", attention_csv(m));
    write_text(a.out / "showcase_attention.svg", svg::heatmap("attention " + *a.composition, ion_labels(), m));
    model::write_rollout_csv(a.out / "showcase_rollout.csv", {p});
    write_text(a.out / "showcase_rejection.svg", rejection_svg(p, nullptr));
    res.outputs.insert(res.outputs.end(), {a.out / "showcase_attention.csv", a.out / "showcase_attention.svg",
                                           a.out / "showcase_rollout.csv", a.out / "showcase_rejection.svg"});
    double lowest = INFINITY;
    for (std::size_t i = 0; i < p.flux.size(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (comp.present[j]) lowest = std::min(lowest, p.rejection(i, j));
    res.summary["showcase_min_rejection"] = lowest;
  }
  if (res.outputs.empty()) throw std::invalid_argument("export-attention: give --data and/or --composition");

  Manifest m;
  m.command = "export-attention";
  m.argv = a.argv;
  m.config = {{"architecture", ckpt.architecture}};
  if (a.sample) m.config["sample"] = *a.sample;
  if (a.composition) m.config["composition"] = *a.composition;
  m.seeds = ckpt.seeds;
  m.inputs = inputs;
  m.outputs = res.outputs;
  m.warnings = res.warnings;
  m.extra["summary"] = res.summary;
  m.seconds = since(t0);
  m.write(a.out);
  return res;
}

CommandResult cmd_repro(const ReproArgs& a) {
  const auto t0 = Clock::now();
  if (a.out.empty()) throw std::invalid_argument("repro: --out is required");
  RunConfig cfg = load_run_config(a.config);
  if (a.seed) cfg.benchmark.seed = *a.seed;
  const std::uint64_t seed = cfg.benchmark.seed;
  fs::create_directories(a.out);
  // Sub-steps read the effective configuration from a file inside out.
  const fs::path cfg_file = a.out / "config.json";
  write_text(cfg_file, cfg.to_json().dump(2) + "\n");

  CommandResult res;
  json steps;
  auto absorb = [&](const char* step, const CommandResult& r) {
    for (const auto& w : r.warnings) res.warnings.push_back(std::string(step) + ": " + w);
    steps[step] = r.summary;
    if (r.summary.value("failed", false)) res.summary["failed"] = true;
  };
  auto common = [&](Common c) {
    c.argv = a.argv;
    c.config = cfg_file;
    c.threads = a.threads;
    return c;
  };

  SimulateArgs sim;
  static_cast<Common&>(sim) = common({});
  sim.out = a.out / "data";
  absorb("simulate", cmd_simulate(sim));

  TrainArgs pre;
  static_cast<Common&>(pre) = common({});
  pre.data = a.out / "data" / "pretrain.csv";
  pre.ckpt_out = a.out / "pretrain" / "checkpoint.json";
  pre.seed = seed;
  absorb("pretrain", cmd_pretrain(pre));

  TrainArgs ft;
  static_cast<Common&>(ft) = common({});
  ft.data = a.out / "data" / "finetune.csv";
  ft.ckpt_in = pre.ckpt_out;
  ft.ckpt_out = a.out / "finetune" / "checkpoint.json";
  ft.seed = seed;
  absorb("finetune", cmd_finetune(ft));

  EvaluateArgs ev;
  static_cast<Common&>(ev) = common({});
  ev.ckpt = ft.ckpt_out;
  ev.data = a.out / "data" / "test.csv";
  ev.out = a.out / "evaluate";
  absorb("evaluate", cmd_evaluate(ev));

  if (cfg.model.attention) {
    AttentionArgs at;
    static_cast<Common&>(at) = common({});
    at.ckpt = ft.ckpt_out;
    at.data = ev.data;
    at.out = a.out / "attention";
    if (!cfg.showcase.empty()) at.composition = cfg.showcase;
    absorb("export-attention", cmd_export_attention(at));
  }

  AblateArgs ab;
  static_cast<Common&>(ab) = common({});
  ab.data_dir = a.out / "data";
  ab.out = a.out / "ablation";
  absorb("ablate", cmd_ablate(ab));

  res.summary["steps"] = steps;
  for (const auto& dir : {"data", "pretrain", "finetune", "evaluate", "attention", "ablation"})
    if (fs::exists(a.out / dir)) res.outputs.push_back(a.out / dir);
  res.outputs.push_back(cfg_file);

  Manifest m;
  m.command = "repro";
  m.argv = a.argv;
  m.config = cfg.to_json();
  m.seeds = {seed};
  m.outputs = res.outputs;
  m.warnings = res.warnings;
  m.seconds = since(t0);
  m.extra["summary"] = res.summary;
  m.extra["threads"] = a.threads;
  m.write(a.out);
  res.summary["seconds"] = m.seconds;
  return res;
}

}  // namespace ionflux::cli
