#include <stdexcept>

#include "ionflux/bench/baselines.hpp"
#include "ionflux/model/model.hpp"
#include "ionflux/model/odenet.hpp"

namespace ionflux::model {

std::unique_ptr<Model> make_model(const json& architecture) {
  const std::string family = architecture.value("family", std::string());
  if (family == "odenet") return std::make_unique<ODENet>(ODENetConfig::from_json(architecture));
  if (family == "mlp" || family == "conv" || family == "unet") {
    return std::make_unique<bench::Baseline>(bench::BaselineConfig::from_json(architecture));
  }
  throw std::invalid_argument("unknown model family '" + family + "'");
}

}  // namespace ionflux::model
