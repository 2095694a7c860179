#include "ionflux/data/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "ionflux/util/format.hpp"

namespace ionflux::data {

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Simulated: return "SIMULATED";
    case Provenance::PseudoExperimental: return "PSEUDO_EXPERIMENTAL";
    case Provenance::Experimental: return "EXPERIMENTAL";
  }
  return "?";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "SIMULATED") return Provenance::Simulated;
  if (s == "PSEUDO_EXPERIMENTAL") return Provenance::PseudoExperimental;
  if (s == "EXPERIMENTAL") return Provenance::Experimental;
  throw std::invalid_argument("unknown provenance '" + std::string(s) + "'");
}

NumArray RolloutSample::rejection() const {
  NumArray r(points(), kNumIons, 0.0);
  for (std::size_t i = 0; i < points(); ++i)
    for (std::size_t j = 0; j < kNumIons; ++j)
      if (composition.present[j] && composition.c_in[j] > 0.0) r(i, j) = 1.0 - conc(i, j) / composition.c_in[j];
  return r;
}

namespace {

using util::fmt;

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(std::string_view s, std::size_t line, const char* what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw DatasetError("line " + std::to_string(line) + ": bad " + what + " '" + std::string(s) + "'");
  }
  return v;
}

struct Partial {
  std::string id;
  Provenance provenance{};
  std::size_t first_line = 0;
  std::array<bool, kNumIons> seen{};
  std::array<bool, kNumIons> present{};
  std::array<double, kNumIons> feed{};
  // (flux, c_perm, sigma) per ion, in file order
  std::array<std::vector<std::array<double, 3>>, kNumIons> rows;
};

}  // namespace

void write_dataset_csv(const std::filesystem::path& path, std::vector<RolloutSample> samples) {
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < kNumIons; ++j) {
      const auto& ion = ion_table()[j];
      const bool p = s.composition.present[j];
      for (std::size_t i = 0; i < s.points(); ++i) {
        out << s.id << ',' << provenance_name(s.provenance) << ',' << ion.name << ',' << ion.valence << ',';
        if (p) out << fmt(s.composition.c_in[j]);
        out << ',' << fmt(s.flux[i]) << ',';
        if (p) out << fmt(s.conc(i, j));
        out << ',';
        if (p) out << fmt(s.sigma(i, j));
        out << '\n';
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << out.str();
}

std::vector<RolloutSample> ingest_csv(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(f, line)) throw DatasetError("line 1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw DatasetError("line 1: header must be '" + std::string(kCsvHeader) + "'");

  std::map<std::string, Partial> parts;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fs = fields(line);
    if (fs.size() != 8) {
      throw DatasetError("line " + std::to_string(lineno) + ": expected 8 fields, got " + std::to_string(fs.size()));
    }
    const std::string id(fs[0]);
    if (id.empty()) throw DatasetError("line " + std::to_string(lineno) + ": empty sample_id");
    auto [it, fresh] = parts.try_emplace(id);
    Partial& p = it->second;
    Provenance prov;
    try {
      prov = parse_provenance(fs[1]);
    } catch (const std::invalid_argument& e) {
      throw DatasetError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (fresh) {
      p.id = id;
      p.provenance = prov;
      p.first_line = lineno;
    } else if (p.provenance != prov) {
      throw DatasetError("line " + std::to_string(lineno) + ": provenance changes within sample " + id);
    }
    std::size_t j = 0;
    try {
      j = ion_index(fs[2]);
    } catch (const std::invalid_argument& e) {
      throw DatasetError("line " + std::to_string(lineno) + ": " + e.what());
    }
    const double z = parse_double(fs[3], lineno, "valence");
    if (z != ion_table()[j].valence) {
      throw DatasetError("line " + std::to_string(lineno) + ": valence " + std::string(fs[3]) + " does not match " +
                         std::string(ion_table()[j].name));
    }
    const bool present = !fs[4].empty();
    const double feed = present ? parse_double(fs[4], lineno, "c_feed_mol_m3") : 0.0;
    const double flux = parse_double(fs[5], lineno, "J_v_m_per_s");
    if (present != !fs[6].empty() || present != !fs[7].empty()) {
      throw DatasetError("line " + std::to_string(lineno) + ": c_feed, c_perm and sigma must be all empty or all set");
    }
    const double cp = present ? parse_double(fs[6], lineno, "c_perm_mol_m3") : 0.0;
    const double sg = present ? parse_double(fs[7], lineno, "sigma_mol_m3") : 0.0;
    if (feed < 0.0 || cp < 0.0 || sg < 0.0 || flux < 0.0) {
      throw DatasetError("line " + std::to_string(lineno) + ": negative value");
    }
    if (!p.seen[j]) {
      p.seen[j] = true;
      p.present[j] = present;
      p.feed[j] = feed;
    } else if (p.present[j] != present || p.feed[j] != feed) {
      throw DatasetError("line " + std::to_string(lineno) + ": feed of " + std::string(ion_table()[j].name) +
                         " changes within sample " + id);
    }
    p.rows[j].push_back({flux, cp, sg});
  }

  std::vector<RolloutSample> out;
  for (auto& [id, p] : parts) {
    RolloutSample s;
    s.id = id;
    s.provenance = p.provenance;
    try {
      s.composition = validate_composition(p.feed, p.present);
    } catch (const std::invalid_argument& e) {
      throw DatasetError("sample " + id + " (line " + std::to_string(p.first_line) + "): " + e.what());
    }
    std::vector<double> flux;
    bool reordered = false;
    for (std::size_t j = 0; j < kNumIons; ++j) {
      if (!p.seen[j]) continue;
      auto& rows = p.rows[j];
      if (!std::is_sorted(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; })) {
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
        reordered = true;
      }
      std::vector<double> fj;
      for (const auto& r : rows) fj.push_back(r[0]);
      if (std::adjacent_find(fj.begin(), fj.end()) != fj.end()) {
        throw DatasetError("sample " + id + ": duplicate flux for " + std::string(ion_table()[j].name));
      }
      if (flux.empty()) {
        flux = fj;
      } else if (fj != flux) {
        throw DatasetError("sample " + id + ": ions do not share one flux grid");
      }
    }
    if (reordered && warnings) warnings->push_back("sample " + id + ": flux rows reordered to ascending");
    s.flux = flux;
    s.conc = NumArray(flux.size(), kNumIons, 0.0);
    s.sigma = NumArray(flux.size(), kNumIons, 0.0);
    for (std::size_t j = 0; j < kNumIons; ++j) {
      if (!p.seen[j] || !p.present[j]) continue;
      for (std::size_t i = 0; i < flux.size(); ++i) {
        s.conc(i, j) = p.rows[j][i][1];
        s.sigma(i, j) = p.rows[j][i][2];
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

Split split(const std::vector<RolloutSample>& samples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw std::invalid_argument("split: fraction outside [0, 1]");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return samples[a].id < samples[b].id; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (samples[order[i]].id == samples[order[i - 1]].id) {
      throw std::invalid_argument("split: duplicate sample id " + samples[order[i]].id);
    }
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(samples.size())));
  if (n_train == 0 || n_train == samples.size()) {
    throw std::invalid_argument("split: degenerate partition (" + std::to_string(n_train) + " of " +
                                std::to_string(samples.size()) + " in train)");
  }
  Split s;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? s.train : s.test).push_back(samples[order[i]]);
  const auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::sort(s.train.begin(), s.train.end(), by_id);
  std::sort(s.test.begin(), s.test.end(), by_id);
  return s;
}

}  // namespace ionflux::data
