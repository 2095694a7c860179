#include "ionflux/dspm/generate.hpp"

#include <optional>

#include "ionflux/util/parallel.hpp"

namespace ionflux::dspm {

GenerateResult generate_dataset(const std::vector<SampleRequest>& requests, const MembraneParams& membrane,
                                const SolverConfig& cfg, const GenerateOptions& opts) {
  std::vector<std::optional<data::RolloutSample>> out(requests.size());
  std::vector<std::string> errors(requests.size());
  util::parallel_for(requests.size(), opts.threads, [&](std::size_t r) {
    const auto& req = requests[r];
    data::RolloutSample s;
    s.id = req.id;
    s.composition = req.composition;
    s.flux = req.flux;
    s.provenance = opts.provenance;
    s.conc = NumArray(req.flux.size(), kNumIons, 0.0);
    s.sigma = NumArray(req.flux.size(), kNumIons, 0.0);
    try {
      for (std::size_t i = 1; i < req.flux.size(); ++i) {
        if (!(req.flux[i] > req.flux[i - 1])) throw std::invalid_argument("flux grid must be strictly ascending");
      }
      std::optional<PoreSolution> prev;
      for (std::size_t i = 0; i < req.flux.size(); ++i) {
        PoreSolution sol = solve(req.composition, req.flux[i], membrane, cfg, prev ? &*prev : nullptr);
        for (std::size_t j = 0; j < kNumIons; ++j)
          if (req.composition.present[j]) s.conc(i, j) = sol.c_perm[j];
        prev = std::move(sol);
      }
      if (opts.noise) data::assign_sigma(s, opts.noise_model);
      out[r] = std::move(s);
    } catch (const std::exception& e) {
      errors[r] = "sample " + req.id + ": " + e.what();
    }
  });
  GenerateResult res;
  for (std::size_t r = 0; r < requests.size(); ++r) {
    if (out[r]) {
      res.samples.push_back(std::move(*out[r]));
    } else {
      res.failures.push_back(errors[r]);
    }
  }
  return res;
}

}  // namespace ionflux::dspm
