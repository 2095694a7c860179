#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionflux/nn/param_store.hpp"

namespace ionflux::nn {

inline constexpr const char* kCheckpointVersion = "ionflux-ckpt/1";

/// Parameters plus the configuration needed to rebuild the model around them.
struct Checkpoint {
  ParamStore params;
  nlohmann::json architecture = nlohmann::json::object();
  std::vector<std::uint64_t> seeds;  // lineage, oldest first
};

/// Writes `<path>` (JSON manifest) and `<path>.bin` (little-endian float64
/// blob of all arrays concatenated in manifest order).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ionflux::nn
