#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ionflux/ad/num_array.hpp"
#include "ionflux/data/composition.hpp"

namespace ionflux::data {

using ad::NumArray;

enum class Provenance { Simulated, PseudoExperimental, Experimental };

std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view s);

/// One rollout: concentrations at ascending fluxes starting at 0.
/// Absent-ion columns of conc and sigma hold 0; composition.present is
/// authoritative.
struct RolloutSample {
  std::string id;
  MixtureComposition composition;
  std::vector<double> flux;  // m/s
  NumArray conc;             // #flux x 8, mol/m^3 (permeate)
  NumArray sigma;            // #flux x 8, mol/m^3
  Provenance provenance = Provenance::Simulated;

  std::size_t points() const { return flux.size(); }
  /// Rejection 1 - c_p / c_in for present ions, 0 elsewhere.
  NumArray rejection() const;

  friend bool operator==(const RolloutSample&, const RolloutSample&) = default;
};

inline constexpr std::string_view kCsvHeader =
    "sample_id,provenance,ion,valence,c_feed_mol_m3,J_v_m_per_s,c_perm_mol_m3,sigma_mol_m3";

/// Thrown for malformed files; the message carries the 1-based line number.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes one row per (sample, ion, flux), samples ordered by id, ions in
/// vocabulary order, fluxes ascending. Numbers use the shortest round-trip
/// representation; absent ions have empty concentration fields.
void write_dataset_csv(const std::filesystem::path& path, std::vector<RolloutSample> samples);

/// Parses and validates a dataset file. Flux rows given in descending or
/// shuffled order are sorted, with a message appended to warnings.
std::vector<RolloutSample> ingest_csv(const std::filesystem::path& path,
                                      std::vector<std::string>* warnings = nullptr);

struct Split {
  std::vector<RolloutSample> train;
  std::vector<RolloutSample> test;
};

/// Partitions whole samples by id. n_train = round(train_fraction * n).
Split split(const std::vector<RolloutSample>& samples, double train_fraction, std::uint64_t seed);

}  // namespace ionflux::data
