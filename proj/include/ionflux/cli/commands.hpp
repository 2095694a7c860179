#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionflux/bench/ablation.hpp"
#include "ionflux/bench/benchmark.hpp"
#include "ionflux/data/composition.hpp"
#include "ionflux/model/odenet.hpp"

namespace ionflux::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "ionflux 0.1.0";
inline constexpr int kSchemaVersion = 1;

struct TrainingSettings {
  std::size_t pretrain_epochs = 200;
  std::size_t finetune_epochs = 200;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double train_rtol = 1e-4;
};

/// Everything a pipeline run reads from its configuration file.
struct RunConfig {
  bench::BenchmarkConfig benchmark;
  model::ODENetConfig model;
  TrainingSettings training;
  bench::AblationConfig ablation;
  std::string showcase = "Na+=20,Mg2+=10,Ca2+=10,NO3-=60";  // extra rollout for export-attention

  json to_json() const;
  static RunConfig from_json(const json& j);
};

/// Defaults when path is empty.
RunConfig load_run_config(const fs::path& path);
json read_json(const fs::path& path);

/// 64-bit FNV-1a, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string config_hash(const json& config);

/// "Na+=20,Cl-=20" -> validated composition.
data::MixtureComposition parse_composition(const std::string& text);

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::vector<std::string> warnings;
  json extra = json::object();
  double seconds = 0.0;

  /// Writes <dir>/manifest.json. Timings sit under "timings", outside the
  /// hashed config.
  void write(const fs::path& dir) const;
};

struct CommandResult {
  std::vector<std::string> warnings;
  std::vector<fs::path> outputs;
  json summary = json::object();
};

struct Common {
  std::vector<std::string> argv;
  fs::path config;  // run configuration, empty for defaults
  std::size_t threads = 1;
};

struct SimulateArgs : Common {
  fs::path out;
  std::optional<std::uint64_t> seed;
};

struct TrainArgs : Common {
  fs::path data;
  fs::path ckpt_in;
  fs::path ckpt_out;
  std::optional<std::size_t> epochs;
  std::uint64_t seed = 0;
  std::optional<std::string> constraint;
  std::optional<double> lambda;
  std::optional<std::string> family;  // pretrain only; odenet unless given
  std::optional<bool> attention;      // pretrain only
  bool allow_npt = false;
};

struct EvaluateArgs : Common {
  fs::path ckpt;
  fs::path data;
  fs::path out;
  bool dspm = true;  // add the pore model with the nominal membrane as a comparison row
};

struct AblateArgs : Common {
  fs::path data_dir;  // pretrain.csv, finetune.csv, test.csv; generated when empty
  fs::path out;
  std::optional<std::uint64_t> seed;
};

struct AttentionArgs : Common {
  fs::path ckpt;
  fs::path data;
  fs::path out;
  std::optional<std::string> sample;
  std::optional<std::string> composition;
};

struct ReproArgs : Common {
  fs::path out;
  std::optional<std::uint64_t> seed;
};

/// Explicit-composition configs write dataset.csv; otherwise the benchmark
/// section is generated into pretrain.csv, finetune.csv and test.csv.
CommandResult cmd_simulate(const SimulateArgs& a);
CommandResult cmd_pretrain(const TrainArgs& a);
CommandResult cmd_finetune(const TrainArgs& a);
CommandResult cmd_evaluate(const EvaluateArgs& a);
CommandResult cmd_ablate(const AblateArgs& a);
CommandResult cmd_export_attention(const AttentionArgs& a);
/// simulate -> pretrain -> finetune -> evaluate -> export-attention -> ablate
/// into subdirectories of out.
CommandResult cmd_repro(const ReproArgs& a);

/// Headline comparisons from an ablation: per-seed NPT/PT, HIB vs SIB and
/// attention on vs off for every family.
json ablation_findings(const bench::AblationResult& r, const bench::AblationConfig& cfg);

}  // namespace ionflux::cli
