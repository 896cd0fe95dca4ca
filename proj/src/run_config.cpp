#include "qsr/run_config.hpp"

#include <fstream>
#include <set>

#include "qsr/serialize.hpp"

namespace qsr {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key \"" + key + "\" in " +
                                  where);
}

void apply_scene(const json& j, SceneConfig& c) {
  check_keys(j,
             {"hi_size", "lo_size", "n_emitters_range", "fwhm_range",
              "intensity_range", "background_range", "squeeze_min",
              "cluster_fraction", "psf_kinds"},
             "scene");
  from_json(j, c);
}

void apply_net(const json& j, NetConfig& c) {
  check_keys(j,
             {"depth", "filters", "kernel", "leaky_slope", "dropout_rate",
              "upsample_after"},
             "net");
  if (j.contains("depth")) c.depth = j.at("depth").get<int>();
  if (j.contains("filters")) c.filters = j.at("filters").get<int>();
  if (j.contains("kernel")) c.kernel = j.at("kernel").get<int>();
  if (j.contains("leaky_slope")) c.leaky_slope = j.at("leaky_slope").get<double>();
  if (j.contains("dropout_rate"))
    c.dropout_rate = j.at("dropout_rate").get<double>();
  if (j.contains("upsample_after"))
    c.upsample_after = j.at("upsample_after").get<std::vector<int>>();
  c.validate();
}

void apply_train(const json& j, TrainConfig& c) {
  check_keys(j,
             {"learning_rate", "batch_size", "epochs_per_iteration",
              "iterations", "samples_per_iteration", "validation_fraction",
              "adam_beta1", "adam_beta2", "adam_eps"},
             "train");
  if (j.contains("learning_rate"))
    c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("epochs_per_iteration"))
    c.epochs_per_iteration = j.at("epochs_per_iteration").get<int>();
  if (j.contains("iterations")) c.iterations = j.at("iterations").get<int>();
  if (j.contains("samples_per_iteration"))
    c.samples_per_iteration = j.at("samples_per_iteration").get<int>();
  if (j.contains("validation_fraction"))
    c.validation_fraction = j.at("validation_fraction").get<double>();
  if (j.contains("adam_beta1")) c.adam_beta1 = j.at("adam_beta1").get<double>();
  if (j.contains("adam_beta2")) c.adam_beta2 = j.at("adam_beta2").get<double>();
  if (j.contains("adam_eps")) c.adam_eps = j.at("adam_eps").get<double>();
  c.validate();
}

void apply_loss(const json& j, LossConfig& c) {
  check_keys(j, {"epsilon", "filter_sigma"}, "loss");
  if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
  if (j.contains("filter_sigma"))
    c.filter_sigma = j.at("filter_sigma").get<double>();
  c.validate();
}

void apply_eval(const json& j, EvalConfig& c) {
  check_keys(j,
             {"mass_threshold", "min_separation_px", "psf_fwhm_hi_px",
              "fit_line"},
             "eval");
  if (j.contains("mass_threshold"))
    c.mass_threshold = j.at("mass_threshold").get<double>();
  if (j.contains("min_separation_px"))
    c.min_separation_px = j.at("min_separation_px").get<double>();
  if (j.contains("psf_fwhm_hi_px"))
    c.psf_fwhm_hi_px = j.at("psf_fwhm_hi_px").get<double>();
  if (j.contains("fit_line")) c.fit_line = j.at("fit_line").get<bool>();
}

void apply_io(const json& j, PixelCalibration& c) {
  check_keys(j, {"nm_per_hires_pixel"}, "io");
  if (j.contains("nm_per_hires_pixel"))
    c.nm_per_hires_pixel = j.at("nm_per_hires_pixel").get<double>();
}

}  // namespace

RunConfig RunConfig::preset(const std::string& name) {
  RunConfig c;  // defaults are the paper-scale parameters
  if (name == "paper" || name.empty()) return c;
  if (name == "toy") {
    c.scene.hi_size = 80;
    c.scene.lo_size = 20;
    c.scene.n_emitters_min = 1;
    c.scene.n_emitters_max = 6;
    c.scene.fwhm_min = 9.0;
    c.scene.fwhm_max = 16.0;
    c.scene.intensity_min = 1000.0;
    c.scene.intensity_max = 1e4;
    c.scene.background_min = 1.0;
    c.scene.background_max = 10.0;
    c.scene.squeeze_min = 0.85;
    c.scene.cluster_fraction = 0.4;

    c.net.depth = 8;
    c.net.filters = 12;
    c.net.upsample_after = {2, 4};

    c.train.learning_rate = 1e-3;
    c.train.batch_size = 16;
    c.train.iterations = 16;
    c.train.epochs_per_iteration = 6;
    c.train.samples_per_iteration = 256;

    c.loss.filter_sigma = 1.5;
    return c;
  }
  throw std::invalid_argument("unknown preset: " + name);
}

void RunConfig::apply_json(const json& doc) {
  check_keys(doc, {"scene", "net", "train", "loss", "eval", "io", "seed"},
             "top level");
  if (doc.contains("scene")) apply_scene(doc.at("scene"), scene);
  if (doc.contains("net")) apply_net(doc.at("net"), net);
  if (doc.contains("train")) apply_train(doc.at("train"), train);
  if (doc.contains("loss")) apply_loss(doc.at("loss"), loss);
  if (doc.contains("eval")) apply_eval(doc.at("eval"), eval);
  if (doc.contains("io")) apply_io(doc.at("io"), calibration);
  if (doc.contains("seed")) seed = doc.at("seed").get<std::uint64_t>();
}

json RunConfig::to_json() const {
  json j;
  j["scene"] = scene;
  j["net"] = {{"depth", net.depth},
              {"filters", net.filters},
              {"kernel", net.kernel},
              {"leaky_slope", net.leaky_slope},
              {"dropout_rate", net.dropout_rate},
              {"upsample_after", net.upsample_after}};
  j["train"] = {{"learning_rate", train.learning_rate},
                {"batch_size", train.batch_size},
                {"epochs_per_iteration", train.epochs_per_iteration},
                {"iterations", train.iterations},
                {"samples_per_iteration", train.samples_per_iteration},
                {"validation_fraction", train.validation_fraction},
                {"adam_beta1", train.adam_beta1},
                {"adam_beta2", train.adam_beta2},
                {"adam_eps", train.adam_eps}};
  j["loss"] = {{"epsilon", loss.epsilon}, {"filter_sigma", loss.filter_sigma}};
  j["eval"] = {{"mass_threshold", eval.mass_threshold},
               {"min_separation_px", eval.min_separation_px},
               {"psf_fwhm_hi_px", eval.psf_fwhm_hi_px},
               {"fit_line", eval.fit_line}};
  j["io"] = {{"nm_per_hires_pixel", calibration.nm_per_hires_pixel}};
  if (seed) j["seed"] = *seed;
  return j;
}

std::uint64_t RunConfig::require_seed(const std::string& what) const {
  if (!seed)
    throw std::invalid_argument(what + " requires a seed (--seed or \"seed\" in the config)");
  return *seed;
}

RunConfig load_run_config(const std::string& preset_name,
                          const std::string& config_path) {
  RunConfig c = RunConfig::preset(preset_name);
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw std::runtime_error("cannot open config: " + config_path);
    c.apply_json(json::parse(is));
  }
  return c;
}

}  // namespace qsr
