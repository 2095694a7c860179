#include "ionflux/model/rollout.hpp"

#include <cmath>
#include <fstream>

#include "ionflux/data/ions.hpp"
#include "ionflux/util/format.hpp"

namespace ionflux::model {

double RolloutPrediction::max_charge_violation() const {
  const auto z = valence_vector();
  double worst = 0.0;
  for (std::size_t i = 0; i < conc.rows(); ++i) {
    double q = 0.0, l1 = 0.0;
    for (std::size_t j = 0; j < conc.cols(); ++j) {
      q += z[j] * conc(i, j);
      l1 += std::abs(conc(i, j));
    }
    if (l1 > 0.0) worst = std::max(worst, std::abs(q) / l1);
  }
  return worst;
}

std::vector<Var> bind_constants(ad::Tape& tape, const nn::ParamStore& params) {
  std::vector<Var> out;
  out.reserve(params.size());
  for (const auto& e : params.entries()) out.push_back(tape.constant(e.value));
  return out;
}

RolloutPrediction rollout(const Model& model, const nn::ParamStore& params, const data::MixtureComposition& comp,
                          std::span<const double> flux, const std::string& sample_id) {
  ad::Tape tape;
  const auto bound = bind_constants(tape, params);
  ForwardOptions opts;
  opts.record_attention = true;
  Forward f;
  const std::string where = sample_id.empty() ? std::string("rollout") : "rollout of sample " + sample_id;
  try {
    f = model.forward(tape, bound, comp, flux, opts);
  } catch (const ode::NonFiniteDerivative& e) {
    throw ode::NonFiniteDerivative(where + ": " + e.what(), e.location());
  } catch (const ode::MaxStepsExceeded& e) {
    throw ode::MaxStepsExceeded(where + ": " + e.what());
  }
  RolloutPrediction p;
  p.sample_id = sample_id;
  p.composition = comp;
  p.flux.assign(flux.begin(), flux.end());
  p.attention = f.attention;
  p.evaluations = f.evaluations;
  const double cmax = comp.max_concentration();
  const NumArray& u = f.states.value();
  p.conc = NumArray(u.rows(), u.cols(), 0.0);
  p.rejection = NumArray(u.rows(), u.cols(), 0.0);
  for (std::size_t i = 0; i < u.rows(); ++i) {
    for (std::size_t j = 0; j < u.cols(); ++j) {
      if (!comp.present[j]) continue;
      p.conc(i, j) = u(i, j) * cmax;
      p.rejection(i, j) = 1.0 - p.conc(i, j) / comp.c_in[j];
    }
  }
  return p;
}

RolloutPrediction rollout(const data::MixtureComposition& comp, std::span<const double> flux,
                          const nn::Checkpoint& ckpt, const std::string& sample_id) {
  const auto model = make_model(ckpt.architecture);
  return rollout(*model, ckpt.params, comp, flux, sample_id);
}

void write_rollout_csv(const std::filesystem::path& path, const std::vector<RolloutPrediction>& preds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "sample_id,ion,J_v,c_pred,rejection_pred\n";
  const auto& table = data::ion_table();
  for (const auto& p : preds) {
    for (std::size_t j = 0; j < data::kNumIons; ++j) {
      if (!p.composition.present[j]) continue;
      for (std::size_t i = 0; i < p.flux.size(); ++i) {
        out << p.sample_id << ',' << table[j].name << ',' << util::fmt(p.flux[i]) << ',' << util::fmt(p.conc(i, j))
            << ',' << util::fmt(p.rejection(i, j)) << '\n';
      }
    }
  }
}

void write_attention_json(const std::filesystem::path& path, const std::vector<RolloutPrediction>& preds) {
  json doc;
  doc["ions"] = json::array();
  for (const auto& ion : data::ion_table()) doc["ions"].push_back(std::string(ion.name));
  doc["attention"] = json::object();
  for (const auto& p : preds) {
    if (p.attention.empty()) continue;
    json m = json::array();
    for (std::size_t i = 0; i < p.attention.rows(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < p.attention.cols(); ++j) row.push_back(p.attention(i, j));
      m.push_back(row);
    }
    doc["attention"][p.sample_id] = m;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace ionflux::model
