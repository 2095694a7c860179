#include <iostream>

#include <CLI11.hpp>

#include "ionflux/cli/commands.hpp"
#include "ionflux/cli/log.hpp"
#include "ionflux/util/parallel.hpp"

using namespace ionflux::cli;

namespace {

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "run configuration (JSON); defaults when omitted");
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

void add_training(CLI::App* sub, TrainArgs& a, bool finetune) {
  add_common(sub, a);
  sub->add_option("--data", a.data, "dataset CSV")->required();
  sub->add_option("--ckpt-in", a.ckpt_in, finetune ? "pre-trained checkpoint" : "continue from this checkpoint");
  sub->add_option("--ckpt-out", a.ckpt_out, "checkpoint to write; its directory receives the manifest")->required();
  sub->add_option("--epochs", a.epochs, "epochs (config value when omitted)");
  sub->add_option("--seed", a.seed, "initialisation, shuffling and noise seed");
  sub->add_option("--constraint", a.constraint, "hard, soft or none")
      ->check(CLI::IsMember({"hard", "soft", "none"}));
  sub->add_option("--lambda", a.lambda, "soft-penalty weight");
  if (finetune) {
    sub->add_flag("--allow-npt", a.allow_npt, "fine-tune without a pre-trained checkpoint; trains every array");
  } else {
    sub->add_option("--family", a.family, "odenet, mlp, conv or unet")
        ->check(CLI::IsMember({"odenet", "mlp", "conv", "unet"}));
    sub->add_option("--attention", a.attention, "attention block on or off");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ionflux: neural ODE ion transport models, pore-model data and benchmarks"};
  app.require_subcommand(1);
  bool json_logs = false;
  app.add_flag("--json-logs", json_logs, "machine-readable log lines on stderr");

  std::vector<std::string> args(argv, argv + argc);
  const std::size_t threads = ionflux::util::default_threads();

  SimulateArgs sim;
  sim.threads = threads;
  auto* c_sim = app.add_subcommand("simulate", "generate pore-model datasets");
  add_common(c_sim, sim);
  c_sim->add_option("--out", sim.out, "output directory")->required();
  c_sim->add_option("--seed", sim.seed, "overrides the configured seed");

  TrainArgs pre, ft;
  pre.threads = ft.threads = threads;
  auto* c_pre = app.add_subcommand("pretrain", "fit a model to simulated data");
  add_training(c_pre, pre, false);
  auto* c_ft = app.add_subcommand("finetune", "fine-tune on measured or pseudo-experimental data");
  add_training(c_ft, ft, true);

  EvaluateArgs ev;
  ev.threads = threads;
  bool no_dspm = false;
  auto* c_ev = app.add_subcommand("evaluate", "test metrics, parity and rollout plots");
  add_common(c_ev, ev);
  c_ev->add_option("--ckpt", ev.ckpt, "checkpoint")->required();
  c_ev->add_option("--data", ev.data, "test dataset CSV")->required();
  c_ev->add_option("--out", ev.out, "output directory")->required();
  c_ev->add_flag("--no-dspm", no_dspm, "skip the pore-model comparison row");

  AblateArgs ab;
  ab.threads = threads;
  auto* c_ab = app.add_subcommand("ablate", "PT/NPT x HIB/SIB x attention grid over model families");
  add_common(c_ab, ab);
  c_ab->add_option("--data-dir", ab.data_dir, "directory with pretrain.csv, finetune.csv, test.csv");
  c_ab->add_option("--out", ab.out, "output directory")->required();
  c_ab->add_option("--seed", ab.seed, "benchmark seed when generating data");

  AttentionArgs at;
  at.threads = threads;
  auto* c_at = app.add_subcommand("export-attention", "mean attention matrices as CSV and heatmap");
  add_common(c_at, at);
  c_at->add_option("--ckpt", at.ckpt, "checkpoint")->required();
  c_at->add_option("--data", at.data, "dataset CSV");
  c_at->add_option("--out", at.out, "output directory")->required();
  c_at->add_option("--sample", at.sample, "single sample id");
  c_at->add_option("--composition", at.composition, "extra rollout, e.g. Na+=20,Cl-=20");

  ReproArgs rp;
  rp.threads = threads;
  auto* c_rp = app.add_subcommand("repro", "simulate, pretrain, finetune, evaluate, export-attention, ablate");
  add_common(c_rp, rp);
  c_rp->add_option("--out", rp.out, "output directory")->required();
  c_rp->add_option("--seed", rp.seed, "benchmark and training seed");

  auto* c_dc = app.add_subcommand("default-config", "print the default run configuration");

  CLI11_PARSE(app, argc, argv);
  init_logging(json_logs);
  sim.argv = pre.argv = ft.argv = ev.argv = ab.argv = at.argv = rp.argv = args;
  ev.dspm = !no_dspm;

  try {
    CommandResult r;
    if (c_dc->parsed()) {
      std::cout << RunConfig{}.to_json().dump(2) << '\n';
      return 0;
    }
    if (c_sim->parsed()) r = cmd_simulate(sim);
    if (c_pre->parsed()) r = cmd_pretrain(pre);
    if (c_ft->parsed()) r = cmd_finetune(ft);
    if (c_ev->parsed()) r = cmd_evaluate(ev);
    if (c_ab->parsed()) r = cmd_ablate(ab);
    if (c_at->parsed()) r = cmd_export_attention(at);
    if (c_rp->parsed()) r = cmd_repro(rp);
    std::cout << r.summary.dump(2) << '\n';
    return r.summary.value("failed", false) ? 1 : 0;
  } catch (const std::exception& e) {
    log_error(e.what());
    return 1;
  }
}
