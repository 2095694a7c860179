#include "ionflux/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ionflux::nn {

namespace {

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  return std::filesystem::path(manifest.string() + ".bin");
}

void put_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["blob"] = blob_path(path).filename().string();
  manifest["byte_order"] = "little";
  manifest["dtype"] = "float64";
  manifest["optimizer_step"] = ckpt.params.step();
  manifest["architecture"] = ckpt.architecture;
  manifest["seeds"] = ckpt.seeds;

  std::string blob;
  std::size_t offset = 0;
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& e : ckpt.params.entries()) {
    arrays.push_back({{"name", e.name},
                      {"shape", e.value.shape()},
                      {"frozen", e.frozen},
                      {"offset", offset}});
    for (double v : e.value.values()) put_le(blob, v);
    offset += e.value.size();
  }
  manifest["arrays"] = std::move(arrays);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream m(path, std::ios::binary);
  if (!m) throw std::runtime_error("cannot write checkpoint manifest " + path.string());
  m << manifest.dump(2) << '\n';
  std::ofstream b(blob_path(path), std::ios::binary);
  if (!b) throw std::runtime_error("cannot write checkpoint blob " + blob_path(path).string());
  b.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream m(path);
  if (!m) throw std::runtime_error("cannot open checkpoint " + path.string());
  nlohmann::json manifest = nlohmann::json::parse(m);
  if (manifest.value("version", "") != kCheckpointVersion) {
    throw std::runtime_error("checkpoint " + path.string() + ": unsupported version '" +
                             manifest.value("version", "") + "'");
  }
  std::ifstream b(blob_path(path), std::ios::binary);
  if (!b) throw std::runtime_error("cannot open checkpoint blob " + blob_path(path).string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  ckpt.architecture = manifest.at("architecture");
  ckpt.seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& a : manifest.at("arrays")) {
    auto shape = a.at("shape").get<std::vector<std::size_t>>();
    std::size_t count = 1;
    for (auto s : shape) count *= s;
    const std::size_t offset = a.at("offset").get<std::size_t>();
    if ((offset + count) * 8 > blob.size()) {
      throw std::runtime_error("checkpoint " + path.string() + ": blob too short for '" +
                               a.at("name").get<std::string>() + "'");
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = get_le(blob.data() + (offset + i) * 8);
    ckpt.params.add(a.at("name").get<std::string>(), NumArray::from_shape(shape, std::move(data)),
                    a.at("frozen").get<bool>());
  }
  ckpt.params.set_step(manifest.value("optimizer_step", std::uint64_t{0}));
  return ckpt;
}

}  // namespace ionflux::nn
