#include "ionflux/bench/evaluate.hpp"

#include <cmath>
#include <fstream>

#include "ionflux/data/ions.hpp"
#include "ionflux/dspm/generate.hpp"
#include "ionflux/model/losses.hpp"
#include "ionflux/model/rollout.hpp"
#include "ionflux/util/format.hpp"
#include "ionflux/util/parallel.hpp"

namespace ionflux::bench {

EvalMetrics score_predictions(const std::vector<data::RolloutSample>& test, const std::vector<NumArray>& predicted) {
  if (test.size() != predicted.size()) throw std::invalid_argument("score_predictions: sample count mismatch");
  EvalMetrics m;
  if (test.empty()) return m;
  const auto& table = data::ion_table();
  std::array<double, data::kNumIons> rsum{};
  std::array<std::size_t, data::kNumIons> rcount{};
  std::size_t in_band = 0;
  for (std::size_t s = 0; s < test.size(); ++s) {
    const auto& t = test[s];
    const NumArray& p = predicted[s];
    const double cmax = t.composition.max_concentration();
    NumArray pn = p, tn = t.conc;
    for (auto& x : pn.values()) x /= cmax;
    for (auto& x : tn.values()) x /= cmax;
    const auto mask = model::presence(t.composition);
    m.mse += model::pretrain_loss(pn, tn, mask);
    for (std::size_t i = 0; i < t.points(); ++i) {
      double q = 0.0, l1 = 0.0;
      for (std::size_t j = 0; j < data::kNumIons; ++j) {
        q += table[j].valence * p(i, j);
        l1 += std::abs(p(i, j));
        if (!mask[j]) continue;
        ParityPoint pt{t.id, j, t.flux[i], t.conc(i, j), p(i, j), 0.0, 0.0};
        pt.r_true = 1.0 - pt.c_true / t.composition.c_in[j];
        pt.r_pred = 1.0 - pt.c_pred / t.composition.c_in[j];
        if (std::abs(pt.c_pred - pt.c_true) <= 0.1 * std::abs(pt.c_true)) ++in_band;
        rsum[j] += std::abs(pt.r_pred - pt.r_true);
        ++rcount[j];
        m.parity.push_back(pt);
      }
      if (l1 > 0.0) m.max_violation = std::max(m.max_violation, std::abs(q) / l1);
    }
  }
  m.mse /= static_cast<double>(test.size());
  m.band_fraction = m.parity.empty() ? 0.0 : static_cast<double>(in_band) / static_cast<double>(m.parity.size());
  for (std::size_t j = 0; j < data::kNumIons; ++j) m.rejection_mae[j] = rcount[j] ? rsum[j] / rcount[j] : 0.0;
  return m;
}

EvalMetrics evaluate(const model::Model& model, const nn::ParamStore& params,
                     const std::vector<data::RolloutSample>& test, std::size_t threads) {
  std::vector<NumArray> pred(test.size());
  util::parallel_for(test.size(), threads, [&](std::size_t i) {
    pred[i] = model::rollout(model, params, test[i].composition, test[i].flux, test[i].id).conc;
  });
  return score_predictions(test, pred);
}

EvalMetrics evaluate_dspm(const std::vector<data::RolloutSample>& test, const dspm::MembraneParams& membrane,
                          std::size_t threads) {
  std::vector<dspm::SampleRequest> req;
  for (const auto& t : test) req.push_back({t.id, t.composition, t.flux});
  dspm::GenerateOptions opts;
  opts.threads = threads;
  auto gen = dspm::generate_dataset(req, membrane, {}, opts);
  if (!gen.failures.empty()) throw std::runtime_error("evaluate_dspm: " + gen.failures.front());
  std::vector<NumArray> pred;
  for (const auto& s : gen.samples) pred.push_back(s.conc);
  return score_predictions(test, pred);
}

void write_parity_csv(const std::filesystem::path& path, const EvalMetrics& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "sample_id,ion,J_v,c_true,c_pred,rejection_true,rejection_pred\n";
  for (const auto& p : m.parity) {
    out << p.sample_id << ',' << data::ion_table()[p.ion].name << ',' << util::fmt(p.flux) << ','
        << util::fmt(p.c_true) << ',' << util::fmt(p.c_pred) << ',' << util::fmt(p.r_true) << ','
        << util::fmt(p.r_pred) << '\n';
  }
}

}  // namespace ionflux::bench
