#include "ionflux/bench/ablation.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "ionflux/bench/evaluate.hpp"
#include "ionflux/model/odenet.hpp"
#include "ionflux/util/format.hpp"
#include "ionflux/util/parallel.hpp"

namespace ionflux::bench {

namespace {

using Clock = std::chrono::steady_clock;

const char* pt_name(bool pretrained) { return pretrained ? "PT" : "NPT"; }
const char* ib_name(ConstraintMode c) { return c == ConstraintMode::Hard ? "HIB" : "SIB"; }

}  // namespace

nlohmann::json AblationConfig::to_json() const {
  std::vector<std::string> fam;
  for (auto f : families) fam.emplace_back(family_name(f));
  return {{"families", fam},          {"attention", attention},     {"seeds", seeds},
          {"pretrain_epochs", pretrain_epochs}, {"finetune_epochs", finetune_epochs}, {"batch_size", batch_size},
          {"lr", lr},                 {"lambda", lambda},           {"param_tolerance", param_tolerance},
          {"train_rtol", train_rtol}};
}

AblationConfig AblationConfig::from_json(const nlohmann::json& j) {
  AblationConfig c;
  if (j.contains("families")) {
    c.families.clear();
    for (const auto& f : j.at("families")) c.families.push_back(parse_family(f.get<std::string>()));
  }
  if (j.contains("attention")) c.attention = j.at("attention").get<std::vector<bool>>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
  c.finetune_epochs = j.value("finetune_epochs", c.finetune_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.lambda = j.value("lambda", c.lambda);
  c.param_tolerance = j.value("param_tolerance", c.param_tolerance);
  c.train_rtol = j.value("train_rtol", c.train_rtol);
  return c;
}

const AblationRow* AblationResult::find(Family f, bool attention, bool pretrained, ConstraintMode c) const {
  for (const auto& r : rows)
    if (r.family == f && r.attention == attention && r.pretrained == pretrained && r.constraint == c) return &r;
  return nullptr;
}

const AblationCell* AblationResult::cell(Family f, bool attention, bool pretrained, ConstraintMode c,
                                         std::uint64_t seed) const {
  for (const auto& x : cells) {
    if (x.family == f && x.attention == attention && x.pretrained == pretrained && x.constraint == c &&
        x.seed == seed && x.error.empty())
      return &x;
  }
  return nullptr;
}

std::unique_ptr<model::Model> make_cell_model(Family family, bool attention, ConstraintMode constraint, double lambda,
                                              double tolerance) {
  std::unique_ptr<model::Model> m;
  if (family == Family::ODENet) {
    model::ODENetConfig c;
    c.attention = attention;
    c.constraint = constraint;
    c.soft_weight = lambda;
    m = std::make_unique<model::ODENet>(c);
  } else {
    m = std::make_unique<Baseline>(build_baseline(family, attention, constraint, lambda, tolerance));
  }
  const auto reference = static_cast<double>(odenet_param_count(attention));
  const auto count = static_cast<double>(nn::count_params(m->init(0)));
  if (std::abs(count - reference) > tolerance * reference) {
    throw ParameterBudgetError(m->family() + ": " + util::fmt(count) + " parameters vs ODENet " +
                               util::fmt(reference));
  }
  return m;
}

AblationResult run_ablation(const AblationConfig& cfg, const BenchmarkData& data) {
  const auto start = Clock::now();
  AblationResult result;
  for (auto f : cfg.families)
    for (bool att : cfg.attention)
      for (bool pt : {true, false})
        for (auto c : {ConstraintMode::Hard, ConstraintMode::Soft})
          for (auto seed : cfg.seeds) {
            AblationCell cell;
            cell.family = f;
            cell.attention = att;
            cell.pretrained = pt;
            cell.constraint = c;
            cell.seed = seed;
            result.cells.push_back(cell);
          }

  ode::IntegratorConfig train_ode;
  train_ode.rtol = cfg.train_rtol;
  train_ode.atol = cfg.train_rtol * 1e-2;

  util::parallel_for(result.cells.size(), cfg.threads, [&](std::size_t i) {
    AblationCell& cell = result.cells[i];
    const auto t0 = Clock::now();
    try {
      const auto model = make_cell_model(cell.family, cell.attention, cell.constraint, cfg.lambda,
                                         cfg.param_tolerance);
      nn::Checkpoint ckpt = model::initial_checkpoint(*model, cell.seed);
      cell.params = nn::count_params(ckpt.params);
      model::TrainOptions opts;
      opts.batch_size = cfg.batch_size;
      opts.adam.lr = cfg.lr;
      opts.seed = cell.seed;
      opts.integrator = train_ode;
      if (cell.pretrained) {
        opts.stage = model::Stage::Pretrain;
        opts.epochs = cfg.pretrain_epochs;
        auto pre = model::train(ckpt, data.pretrain, opts);
        if (pre.aborted) throw std::runtime_error("pretraining aborted: " + pre.abort_reason);
        cell.pretrain_epochs_run = pre.history.size();
        ckpt = std::move(pre.checkpoint);
      }
      opts.stage = model::Stage::Finetune;
      opts.epochs = cfg.finetune_epochs;
      opts.allow_npt = !cell.pretrained;
      auto ft = model::train(ckpt, data.finetune, opts);
      if (ft.aborted) throw std::runtime_error("fine-tuning aborted: " + ft.abort_reason);
      cell.finetune_epochs_run = ft.history.size();
      if (!ft.history.empty()) cell.finetune_loss = ft.history.back().data_loss;
      const auto metrics = evaluate(*model, ft.checkpoint.params, data.test);
      cell.test_mse = metrics.mse;
      cell.violation = metrics.max_violation;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    cell.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  });

  for (std::size_t i = 0; i < result.cells.size(); i += cfg.seeds.size()) {
    const AblationCell& first = result.cells[i];
    AblationRow row;
    row.family = first.family;
    row.attention = first.attention;
    row.pretrained = first.pretrained;
    row.constraint = first.constraint;
    std::vector<double> mse;
    bool seen = false;
    for (std::size_t k = i; k < i + cfg.seeds.size(); ++k) {
      const auto& c = result.cells[k];
      if (!c.error.empty()) continue;
      row.params = c.params;
      mse.push_back(c.test_mse);
      row.violation_max = seen ? std::max(row.violation_max, c.violation) : c.violation;
      row.violation_min = seen ? std::min(row.violation_min, c.violation) : c.violation;
      seen = true;
    }
    row.runs = mse.size();
    for (double v : mse) row.mse_mean += v;
    if (!mse.empty()) row.mse_mean /= static_cast<double>(mse.size());
    if (mse.size() > 1) {
      double ss = 0.0;
      for (double v : mse) ss += (v - row.mse_mean) * (v - row.mse_mean);
      row.mse_std = std::sqrt(ss / static_cast<double>(mse.size() - 1));
    }
    result.rows.push_back(row);
  }
  result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

void write_ablation_cells_csv(const std::filesystem::path& path, const AblationResult& r) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "family,attention,pretraining,bias,seed,params,test_mse,violation,pretrain_epochs,finetune_epochs,"
         "finetune_loss,error\n";
  for (const auto& c : r.cells) {
    std::string err = c.error;
    for (auto& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    out << family_name(c.family) << ',' << (c.attention ? "on" : "off") << ',' << pt_name(c.pretrained) << ','
        << ib_name(c.constraint) << ',' << c.seed << ',' << c.params << ',' << util::fmt(c.test_mse) << ','
        << util::fmt(c.violation) << ',' << c.pretrain_epochs_run << ',' << c.finetune_epochs_run << ','
        << util::fmt(c.finetune_loss) << ',' << err << '\n';
  }
}

void write_ablation_summary_csv(const std::filesystem::path& path, const AblationResult& r) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "family,attention,pretraining,bias,params,runs,mse_mean,mse_std,violation_min,violation_max\n";
  for (const auto& row : r.rows) {
    out << family_name(row.family) << ',' << (row.attention ? "on" : "off") << ',' << pt_name(row.pretrained) << ','
        << ib_name(row.constraint) << ',' << row.params << ',' << row.runs << ',' << util::fmt(row.mse_mean) << ','
        << util::fmt(row.mse_std) << ',' << util::fmt(row.violation_min) << ',' << util::fmt(row.violation_max)
        << '\n';
  }
}

}  // namespace ionflux::bench
