#include "ionflux/model/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ionflux/data/noise.hpp"
#include "ionflux/model/losses.hpp"
#include "ionflux/model/rollout.hpp"
#include "ionflux/util/parallel.hpp"

namespace ionflux::model {

namespace {

NumArray normalized_targets(const data::RolloutSample& s, const NumArray& conc) {
  const double cmax = s.composition.max_concentration();
  NumArray t = conc;
  for (auto& x : t.values()) x /= cmax;
  return t;
}

struct SampleLoss {
  double data = 0.0;
  double penalty = 0.0;
};

}  // namespace

std::string_view stage_name(Stage s) { return s == Stage::Pretrain ? "pretrain" : "finetune"; }

nn::Checkpoint initial_checkpoint(const Model& model, std::uint64_t seed) {
  nn::Checkpoint c;
  c.params = model.init(seed);
  c.architecture = model.architecture();
  c.architecture["stages"] = json::array();
  c.seeds = {seed};
  return c;
}

bool is_pretrained(const nn::Checkpoint& ckpt) {
  if (!ckpt.architecture.contains("stages")) return false;
  for (const auto& s : ckpt.architecture.at("stages"))
    if (s.get<std::string>() == "pretrain") return true;
  return false;
}

TrainResult train(const nn::Checkpoint& in, const std::vector<data::RolloutSample>& samples,
                  const TrainOptions& opts) {
  TrainResult result;
  result.checkpoint = in;
  if (opts.epochs == 0) return result;
  if (samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (opts.batch_size == 0) throw std::invalid_argument("train: batch size must be positive");

  for (const auto& s : samples) {
    const bool simulated = s.provenance == data::Provenance::Simulated;
    if (opts.stage == Stage::Pretrain && !simulated) {
      throw StageError("pretrain needs SIMULATED data; sample " + s.id + " is " +
                       std::string(data::provenance_name(s.provenance)));
    }
    if (opts.stage == Stage::Finetune && simulated) {
      throw StageError("finetune needs experimental or pseudo-experimental data; sample " + s.id + " is SIMULATED");
    }
  }
  const bool pretrained = is_pretrained(in);
  if (opts.stage == Stage::Finetune && !pretrained && !opts.allow_npt) {
    throw StageError("finetune needs a pre-trained checkpoint (allow_npt trains from this one without freezing)");
  }

  const auto model = make_model(in.architecture);
  nn::ParamStore& params = result.checkpoint.params;
  params.reset_optimizer_state();
  for (const auto& e : params.entries()) params.set_frozen(e.name, false);
  if (opts.stage == Stage::Finetune && pretrained) {
    for (const auto& n : model->finetune_frozen()) params.set_frozen(n, true);
  }
  result.frozen = params.frozen_names();

  const bool soft = model->constraint() == ConstraintMode::Soft;
  const double lambda = model->soft_weight();
  const auto z = valence_vector();
  ForwardOptions fopts;
  fopts.integrator = opts.integrator;

  auto abort = [&](std::size_t epoch, const char* what) {
    result.aborted = true;
    result.abort_reason = "epoch " + std::to_string(epoch + 1) + ": " + what;
  };

  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(samples.size());
  const std::size_t n_batches = (samples.size() + opts.batch_size - 1) / opts.batch_size;

  for (std::size_t epoch = 0; epoch < opts.epochs && !result.aborted; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    stats.epoch = epoch + 1;

    for (std::size_t b = 0; b < n_batches && !result.aborted; ++b) {
      const std::size_t lo = b * opts.batch_size;
      const std::size_t hi = std::min(samples.size(), lo + opts.batch_size);
      const std::size_t n = hi - lo;
      std::vector<nn::Gradients> grads(n);
      std::vector<SampleLoss> losses(n);
      std::vector<std::size_t> clamped(n, 0);
      try {
        util::parallel_for(n, opts.threads, [&](std::size_t i) {
          const auto& s = samples[order[lo + i]];
          const auto mask = presence(s.composition);
          const NumArray target = normalized_targets(
              s, opts.stage == Stage::Finetune ? data::sample_noisy_targets(s, opts.seed, epoch, &clamped[i]) : s.conc);
          ad::Tape tape;
          const auto bound = params.bind(tape);
          const Forward f = model->forward(tape, bound, s.composition, s.flux, fopts);
          Var loss = opts.stage == Stage::Finetune ? finetune_loss(f.states, target, mask)
                                                   : pretrain_loss(f.states, target, mask);
          losses[i].data = loss.value()[0];
          if (soft) {
            Var pen = soft_penalty(f.states, z, mask);
            losses[i].penalty = pen.value()[0];
            loss = ad::add(loss, ad::scale(pen, lambda));
          } else {
            losses[i].penalty = soft_penalty(f.states.value(), z, mask);
          }
          if (!std::isfinite(loss.value()[0])) throw ad::NonFiniteError("non-finite loss on sample " + s.id);
          tape.backward(loss);
          grads[i] = params.zero_gradients();
          params.accumulate(tape, bound, grads[i], 1.0 / static_cast<double>(n));
        });
        nn::Gradients total = params.zero_gradients();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t a = 0; a < total.size(); ++a)
            for (std::size_t q = 0; q < total[a].size(); ++q) total[a][q] += grads[i][a][q];
        nn::adam_step(params, total, opts.adam);
      } catch (const ad::NonFiniteError& e) {
        abort(epoch, e.what());
      } catch (const ode::NonFiniteDerivative& e) {
        abort(epoch, e.what());
      } catch (const ode::MaxStepsExceeded& e) {
        abort(epoch, e.what());
      }
      if (result.aborted) break;
      for (std::size_t i = 0; i < n; ++i) {
        stats.data_loss += losses[i].data;
        stats.penalty += losses[i].penalty;
        result.clamped_targets += clamped[i];
      }
    }
    if (result.aborted) break;
    stats.data_loss /= static_cast<double>(samples.size());
    stats.penalty /= static_cast<double>(samples.size());
    stats.total = stats.data_loss + (soft ? lambda * stats.penalty : 0.0);
    result.history.push_back(stats);
  }

  const std::size_t q = result.history.size() / 4;
  if (q > 0) {
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      first += result.history[i].total;
      last += result.history[result.history.size() - 1 - i].total;
    }
    result.loss_trend_decreasing = last < first;
  }
  result.checkpoint.architecture["stages"].push_back(std::string(stage_name(opts.stage)));
  result.checkpoint.seeds.push_back(opts.seed);
  return result;
}

DatasetLoss dataset_loss(const Model& model, const nn::ParamStore& params,
                         const std::vector<data::RolloutSample>& samples, std::size_t threads,
                         const std::optional<ode::IntegratorConfig>& integrator) {
  if (samples.empty()) return {};
  const auto z = valence_vector();
  std::vector<SampleLoss> losses(samples.size());
  ForwardOptions fopts;
  fopts.integrator = integrator;
  util::parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto& s = samples[i];
    const auto mask = presence(s.composition);
    ad::Tape tape;
    const auto bound = bind_constants(tape, params);
    const NumArray u = model.forward(tape, bound, s.composition, s.flux, fopts).states.value();
    losses[i].data = pretrain_loss(u, normalized_targets(s, s.conc), mask);
    losses[i].penalty = soft_penalty(u, z, mask);
  });
  DatasetLoss out;
  for (const auto& l : losses) {
    out.data_loss += l.data;
    out.penalty += l.penalty;
  }
  out.data_loss /= static_cast<double>(samples.size());
  out.penalty /= static_cast<double>(samples.size());
  return out;
}

}  // namespace ionflux::model
