#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ionflux/cli/commands.hpp"
#include "ionflux/cli/svg.hpp"
#include "ionflux/data/dataset.hpp"
#include "ionflux/model/train.hpp"
#include "ionflux/nn/checkpoint.hpp"

using namespace ionflux;
using namespace ionflux::cli;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kTiny = R"({"benchmark":{"compositions":10,"grid_points":5,"finetune_compositions":3,"finetune_points":4},
 "training":{"pretrain_epochs":3,"finetune_epochs":3},
 "ablation":{"families":["odenet","conv"],"seeds":[0,1],"pretrain_epochs":2,"finetune_epochs":2}})";

std::set<std::string> files(const fs::path& root) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).generic_string());
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(IONFLUX_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("hash and composition helpers") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  const auto c = parse_composition("Na+=20,Cl-=20");
  CHECK(c.count() == 2);
  CHECK_THROWS(parse_composition("Na+=20"));
  CHECK_THROWS(parse_composition("Xx=1,Cl-=1"));
  const auto rc = RunConfig::from_json(RunConfig{}.to_json());
  CHECK(rc.to_json() == RunConfig{}.to_json());
}

TEST_CASE("simulate a minimal config") {
  TempDir tmp("ionflux_cli_sim");
  write(tmp.path / "min.json", R"({"compositions":[{"id":"nacl","c":{"Na+":10,"Cl-":10}}],"flux_points":5})");
  SimulateArgs a;
  a.config = tmp.path / "min.json";
  a.out = tmp.path / "a";
  cmd_simulate(a);
  a.out = tmp.path / "b";
  cmd_simulate(a);
  CHECK(slurp(tmp.path / "a" / "dataset.csv") == slurp(tmp.path / "b" / "dataset.csv"));
  const auto s = data::ingest_csv(tmp.path / "a" / "dataset.csv");
  REQUIRE(s.size() == 1);
  CHECK(s[0].points() == 5);
  std::size_t na_rows = 0;
  std::stringstream lines(slurp(tmp.path / "a" / "dataset.csv"));
  for (std::string l; std::getline(lines, l);) na_rows += l.find(",Na+,") != std::string::npos;
  CHECK(na_rows == 5);

  const auto m = json::parse(slurp(tmp.path / "a" / "manifest.json"));
  CHECK(m["command"] == "simulate");
  CHECK(m["config_hash"] == config_hash(m["config"]));
  CHECK(m.contains("timings"));
  CHECK(!m["config"].contains("timings"));
  CHECK(files(tmp.path / "a") == std::set<std::string>{"dataset.csv", "manifest.json"});
}

TEST_CASE("default benchmark data") {
  TempDir tmp("ionflux_cli_bench");
  SimulateArgs a;
  a.out = tmp.path;
  const auto r = cmd_simulate(a);
  CHECK(r.summary["pretrain"] == 64);
  CHECK(r.summary["test"] == 16);
  CHECK(r.summary["failures"] == 0);
  const auto pre = data::ingest_csv(tmp.path / "pretrain.csv");
  const auto test = data::ingest_csv(tmp.path / "test.csv");
  CHECK(pre.size() == 64);
  CHECK(test.size() == 16);
  for (const auto& s : pre) {
    CHECK(s.flux.front() == 0.0);
    for (std::size_t j = 0; j < data::kNumIons; ++j) CHECK(s.rejection()(0, j) == 0.0);
  }
}

TEST_CASE("training commands") {
  TempDir tmp("ionflux_cli_train");
  write(tmp.path / "tiny.json", kTiny);
  SimulateArgs sim;
  sim.config = tmp.path / "tiny.json";
  sim.out = tmp.path / "data";
  cmd_simulate(sim);

  TrainArgs pre;
  pre.config = sim.config;
  pre.data = tmp.path / "data" / "pretrain.csv";
  pre.ckpt_out = tmp.path / "pre" / "model.json";
  const auto pr = cmd_pretrain(pre);
  CHECK(pr.summary["epochs"] == 3);

  SUBCASE("zero epochs leave the checkpoint unchanged") {
    TrainArgs ft;
    ft.config = sim.config;
    ft.data = tmp.path / "data" / "finetune.csv";
    ft.ckpt_in = pre.ckpt_out;
    ft.ckpt_out = tmp.path / "zero" / "model.json";
    ft.epochs = 0;
    cmd_finetune(ft);
    CHECK(slurp(ft.ckpt_out) == slurp(pre.ckpt_out));
    CHECK(slurp(ft.ckpt_out.string() + ".bin") == slurp(pre.ckpt_out.string() + ".bin"));
  }
  SUBCASE("finetune freezes the encoder and the first three MLP layers") {
    TrainArgs ft;
    ft.config = sim.config;
    ft.data = tmp.path / "data" / "finetune.csv";
    ft.ckpt_in = pre.ckpt_out;
    ft.ckpt_out = tmp.path / "ft" / "model.json";
    cmd_finetune(ft);
    const auto m = json::parse(slurp(tmp.path / "ft" / "manifest.json"));
    const std::vector<std::string> frozen = m["frozen"];
    CHECK(frozen == std::vector<std::string>{"embed.weight", "embed.bias", "pos", "attn.w_q", "attn.w_k", "attn.w_v",
                                             "mlp1.weight", "mlp1.bias", "mlp2.weight", "mlp2.bias", "mlp3.weight",
                                             "mlp3.bias"});
    const auto before = nn::load_checkpoint(pre.ckpt_out), after = nn::load_checkpoint(ft.ckpt_out);
    CHECK(before.params.value("mlp2.weight") == after.params.value("mlp2.weight"));
    CHECK(!(before.params.value("mlp5.weight") == after.params.value("mlp5.weight")));
  }
  SUBCASE("stage order") {
    TrainArgs ft;
    ft.config = sim.config;
    ft.data = tmp.path / "data" / "finetune.csv";
    ft.ckpt_out = tmp.path / "npt" / "model.json";
    CHECK_THROWS_AS(cmd_finetune(ft), model::StageError);
    ft.allow_npt = true;
    const auto r = cmd_finetune(ft);
    CHECK(r.summary["epochs"] == 3);
    const auto m = json::parse(slurp(tmp.path / "npt" / "manifest.json"));
    CHECK(m["frozen"].empty());
    // Pretraining rejects non-simulated data.
    TrainArgs bad = pre;
    bad.data = ft.data;
    bad.ckpt_out = tmp.path / "bad" / "model.json";
    CHECK_THROWS_AS(cmd_pretrain(bad), model::StageError);
  }
  SUBCASE("baseline families train through the same command") {
    TrainArgs b = pre;
    b.family = "unet";
    b.attention = false;
    b.ckpt_out = tmp.path / "unet" / "model.json";
    cmd_pretrain(b);
    CHECK(nn::load_checkpoint(b.ckpt_out).architecture["family"] == "unet");
  }
}

TEST_CASE("evaluate and export-attention outputs") {
  TempDir tmp("ionflux_cli_eval");
  write(tmp.path / "tiny.json", kTiny);
  SimulateArgs sim;
  sim.config = tmp.path / "tiny.json";
  sim.out = tmp.path / "data";
  cmd_simulate(sim);
  TrainArgs pre;
  pre.config = sim.config;
  pre.data = tmp.path / "data" / "pretrain.csv";
  pre.ckpt_out = tmp.path / "pre" / "model.json";
  cmd_pretrain(pre);

  EvaluateArgs ev;
  ev.config = sim.config;
  ev.ckpt = pre.ckpt_out;
  ev.data = tmp.path / "data" / "test.csv";
  ev.out = tmp.path / "eval";
  const auto r = cmd_evaluate(ev);
  const auto test = data::ingest_csv(ev.data);
  std::size_t points = 0;
  for (const auto& s : test) points += s.points() * s.composition.count();
  std::stringstream parity(slurp(ev.out / "parity.csv"));
  std::size_t rows = 0;
  for (std::string l; std::getline(parity, l);) ++rows;
  CHECK(rows == points + 1);
  CHECK(r.summary["band_fraction"] >= 0.0);
  CHECK(r.summary["band_fraction"] <= 1.0);
  CHECK(r.summary["max_violation"] <= 1e-9);
  const std::string metrics = slurp(ev.out / "metrics.csv");
  CHECK(metrics.find("\nodenet,") != std::string::npos);
  CHECK(metrics.find("\ndspm-nominal,") != std::string::npos);
  for (const auto& s : test) CHECK(fs::exists(ev.out / "rollouts" / ("rejection_" + s.id + ".svg")));

  AttentionArgs at;
  at.ckpt = pre.ckpt_out;
  at.data = ev.data;
  at.out = tmp.path / "att";
  at.composition = "Na+=20,Mg2+=10,Ca2+=10,NO3-=60";
  cmd_export_attention(at);
  std::stringstream csv(slurp(at.out / "attention.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "ion,Na+,K+,Li+,Mg2+,Ca2+,Cl-,SO42-,NO3-");
  std::set<std::size_t> present;
  for (const auto& s : test)
    for (std::size_t j = 0; j < data::kNumIons; ++j)
      if (s.composition.present[j]) present.insert(j);
  std::size_t i = 0;
  for (; std::getline(csv, line); ++i) {
    std::stringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    double sum = 0.0;
    std::size_t cols = 0;
    for (; std::getline(cells, cell, ','); ++cols) sum += std::stod(cell);
    CHECK(cols == 8);
    if (present.count(i)) {
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    } else {
      CHECK(sum == 0.0);
    }
  }
  CHECK(i == 8);
  CHECK(fs::exists(at.out / "showcase_rejection.svg"));
  const std::string svg = slurp(at.out / "attention.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("href") == std::string::npos);
  CHECK(svg.find(">SO42-<") != std::string::npos);
}

TEST_CASE("repro is byte-identical apart from manifest timings") {
  TempDir tmp("ionflux_cli_repro");
  write(tmp.path / "tiny.json", kTiny);
  ReproArgs a;
  a.config = tmp.path / "tiny.json";
  a.out = tmp.path / "one";
  cmd_repro(a);
  a.out = tmp.path / "two";
  a.threads = 2;
  cmd_repro(a);
  const auto f1 = files(tmp.path / "one"), f2 = files(tmp.path / "two");
  CHECK(f1 == f2);
  std::size_t compared = 0;
  for (const auto& f : f1) {
    const auto name = fs::path(f).filename().string();
    if (name == "manifest.json" || name == "config.json") continue;
    INFO(f);
    CHECK(slurp(tmp.path / "one" / f) == slurp(tmp.path / "two" / f));
    ++compared;
  }
  CHECK(compared > 20);
  for (const auto& dir : {"", "data", "pretrain", "finetune", "evaluate", "attention", "ablation"})
    CHECK(fs::exists(tmp.path / "one" / dir / "manifest.json"));
  const auto findings = json::parse(slurp(tmp.path / "one" / "ablation" / "ablation_summary.json"));
  CHECK(findings["findings"]["constraint"]["hib_violation_max"] <= 1e-9);
  CHECK(findings["findings"]["constraint"]["sib_violation_min"] > 0.0);
}

TEST_CASE("svg output is deterministic and self-contained") {
  svg::Series s{"a", {0, 1, 2}, {0.1, -0.2, 0.3}};
  const auto one = svg::line_plot("t", "x", "y", {s});
  CHECK(one == svg::line_plot("t", "x", "y", {s}));
  CHECK(one.find("-0.2") != std::string::npos);  // negative tick label, no clipping
  const auto bars = svg::bar_chart("b", "y", {{"x<1", 1.0, 0.1, "g"}});
  CHECK(bars.find("x&lt;1") != std::string::npos);
}

TEST_CASE("exit codes") {
  TempDir tmp("ionflux_cli_exit");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") != 0);
  CHECK(run_cli("evaluate --ckpt " + (tmp.path / "missing.json").string() + " --data x.csv --out " +
                (tmp.path / "o").string()) != 0);
  CHECK(run_cli("default-config") == 0);
  write(tmp.path / "min.json", R"({"compositions":[{"id":"x","c":{"Na+":10,"Cl-":3}}],"flux_points":3})");
  CHECK(run_cli("simulate --config " + (tmp.path / "min.json").string() + " --out " + (tmp.path / "o").string()) != 0);
  CHECK(run_cli("--json-logs finetune --data " + (tmp.path / "none.csv").string() + " --ckpt-out " +
                (tmp.path / "c.json").string()) != 0);
  write(tmp.path / "v2.json", R"({"schema_version":2,"compositions":[{"id":"x","c":{"Na+":10,"Cl-":10}}]})");
  CHECK(run_cli("simulate --config " + (tmp.path / "v2.json").string() + " --out " + (tmp.path / "o2").string()) != 0);
  CHECK(RunConfig{}.to_json().at("schema_version") == kSchemaVersion);
  const json back = RunConfig::from_json(RunConfig{}.to_json()).to_json();
  CHECK(back == RunConfig{}.to_json());
}
