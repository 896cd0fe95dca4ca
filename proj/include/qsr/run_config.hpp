#ifndef QSR_RUN_CONFIG_HPP
#define QSR_RUN_CONFIG_HPP

#include <json.hpp>

#include <optional>
#include <string>

#include "qsr/localize.hpp"
#include "qsr/loss.hpp"
#include "qsr/net.hpp"
#include "qsr/scene.hpp"
#include "qsr/train.hpp"

namespace qsr {

// Full run configuration: JSON sections scene/net/train/loss/eval/io
// plus a seed. Unknown keys anywhere are rejected.
struct RunConfig {
  SceneConfig scene;
  NetConfig net;
  TrainConfig train;
  LossConfig loss;
  EvalConfig eval;
  PixelCalibration calibration;
  std::optional<std::uint64_t> seed;

  // "paper" carries the published hyperparameters; "toy" is the
  // desk-scale variant used by the end-to-end tests.
  static RunConfig preset(const std::string& name);

  void apply_json(const nlohmann::json& doc);  // overrides on top of *this
  nlohmann::json to_json() const;              // full echo, for manifests

  std::uint64_t require_seed(const std::string& what) const;
};

RunConfig load_run_config(const std::string& preset_name,
                          const std::string& config_path);

}  // namespace qsr

#endif
