#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "qsr/convolution.hpp"
#include "qsr/dataset.hpp"
#include "qsr/localize.hpp"
#include "qsr/run_config.hpp"
#include "qsr/tensor_io.hpp"
#include "qsr/train.hpp"

using nlohmann::json;

namespace {

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const std::string& path, const qsr::RunConfig& cfg,
                    const json& extra) {
  json m = extra;
  m["config"] = cfg.to_json();
  m["created"] = now_iso8601();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << m.dump(2) << "\n";
}

// Emitters live on the nonzero pixels of a stored unit-mass target.
qsr::EmitterSet truth_from_target(const qsr::Grid& target) {
  qsr::EmitterSet set;
  set.grid_hi = target.rows();
  set.grid_lo = target.rows() / 4;
  for (Eigen::Index i = 0; i < target.rows(); ++i)
    for (Eigen::Index j = 0; j < target.cols(); ++j)
      if (target(i, j) > 0)
        set.emitters.push_back({double(j), double(i), target(i, j)});
  return set;
}

int cmd_simulate(const qsr::RunConfig& cfg, std::uint64_t n,
                 const std::string& out_path) {
  if (n == 0) throw std::invalid_argument("simulate: nothing to generate (n = 0)");
  const std::uint64_t seed = cfg.require_seed("simulate");
  const auto rng = qsr::RngState::seeded(seed);
  auto pairs = qsr::generate_pairs(rng, cfg.scene, n);
  qsr::save_archive(out_path, pairs, seed, cfg.scene);
  write_manifest(out_path + ".manifest.json", cfg,
                 {{"archive", out_path}, {"count", n}, {"seed", seed}});
  std::cout << "wrote " << n << " pairs to " << out_path << "\n";
  return 0;
}

int cmd_train(qsr::RunConfig cfg, const std::string& out_dir) {
  cfg.train.seed = cfg.require_seed("train");
  std::filesystem::create_directories(out_dir);
  write_manifest(out_dir + "/run_manifest.json", cfg, {{"out_dir", out_dir}});
  const auto res = qsr::train_incremental<float>(cfg.train, cfg.scene, cfg.net,
                                                 cfg.loss, out_dir);
  qsr::save_weights(out_dir + "/best.qsrw", res.best, cfg.net);
  qsr::save_weights(out_dir + "/final.qsrw", res.final, cfg.net);
  res.log.write_csv(out_dir + "/train_log.csv");
  std::cout << "best validation loss " << res.best_val << ", weights in "
            << out_dir << "/best.qsrw\n";
  return 0;
}

int cmd_infer(const std::string& weights_path, const std::string& input_path,
              const std::string& out_path) {
  qsr::NetConfig net_cfg;
  const auto params = qsr::load_weights<float>(weights_path, net_cfg);
  const qsr::Grid input = qsr::load_qsrt(input_path);
  const qsr::GridF out = qsr::forward_eval(params, net_cfg, qsr::GridF(input.cast<float>()));
  const qsr::Grid out64 = out.cast<double>();
  qsr::save_qsrt(out_path, out64);
  qsr::save_pgm16(out_path + ".pgm", out64);
  std::cout << "reconstruction " << out.rows() << "x" << out.cols()
            << " (mass " << out64.sum() << ") -> " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const qsr::RunConfig& cfg, const std::string& weights_path,
                 const std::string& recon_path, const std::string& archive_path,
                 const std::string& out_path) {
  const auto pairs = qsr::load_archive(archive_path);
  if (pairs.empty()) throw std::runtime_error("evaluate: empty archive");

  json reports = json::array();
  if (!recon_path.empty()) {
    const qsr::Grid recon = qsr::load_qsrt(recon_path);
    reports.push_back(qsr::evaluate_reconstruction(
        recon, truth_from_target(pairs.at(0).target), cfg.calibration, cfg.eval));
  } else {
    qsr::NetConfig net_cfg;
    const auto params = qsr::load_weights<float>(weights_path, net_cfg);
    for (const auto& p : pairs) {
      const qsr::GridF recon =
          qsr::forward_eval(params, net_cfg, qsr::GridF(p.input.cast<float>()));
      reports.push_back(qsr::evaluate_reconstruction(
          recon.cast<double>(), truth_from_target(p.target), cfg.calibration,
          cfg.eval));
    }
  }

  double mean = 0;
  std::size_t n_ok = 0;
  for (const auto& r : reports)
    if (!r.at("failed").get<bool>()) {
      mean += r.at("mean_distance").get<double>();
      ++n_ok;
    }
  json summary{{"n_scenes", reports.size()},
               {"n_failed", reports.size() - n_ok},
               {"mean_distance", n_ok ? mean / double(n_ok) : 0.0},
               {"unit", cfg.calibration.unit()},
               {"reports", reports}};
  std::ofstream os(out_path);
  os << summary.dump(2) << "\n";
  qsr::write_report_csv(out_path + ".csv", summary);
  std::cout << "evaluated " << reports.size() << " scenes, summary in "
            << out_path << "\n";
  return 0;
}

// Central finite differences against backward() on a small net.
int cmd_gradcheck() {
  qsr::NetConfig net_cfg;
  net_cfg.depth = 3;
  net_cfg.filters = 2;
  net_cfg.kernel = 3;
  net_cfg.dropout_rate = 0.0;
  net_cfg.upsample_after = {1};
  qsr::LossConfig loss_cfg;
  loss_cfg.filter_sigma = 1.0;

  auto rng = qsr::RngState::seeded(7);
  auto params = qsr::init_params<double>(rng, net_cfg);
  qsr::Grid input(8, 8);
  for (Eigen::Index i = 0; i < input.size(); ++i)
    input.data()[i] = rng.uniform(0.0, 10.0);
  qsr::Grid target = qsr::Grid::Zero(16, 16);
  target(5, 7) = 0.5;
  target(11, 3) = 0.5;

  auto loss_of = [&](const qsr::NetParams& p) {
    const qsr::Grid pred = qsr::forward_eval(p, net_cfg, input);
    return double(qsr::loss_and_grad(pred, target, loss_cfg).loss);
  };

  qsr::ForwardCacheT<double> cache;
  qsr::RngState drop_rng = rng.child(1);
  const qsr::Grid pred = qsr::forward_train(params, net_cfg, input, drop_rng, cache);
  const auto lg = qsr::loss_and_grad(pred, target, loss_cfg);
  const auto bw = qsr::backward(params, net_cfg, cache, lg.grad);

  const double h = 1e-6;
  double worst = 0;
  Eigen::Index worst_i = 0;
  for (Eigen::Index i = 0; i < params.flat.size(); ++i) {
    qsr::NetParams p = params;
    p.flat[i] += h;
    const double up = loss_of(p);
    p.flat[i] -= 2 * h;
    const double dn = loss_of(p);
    const double fd = (up - dn) / (2 * h);
    const double an = bw.param_grads[i];
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
    if (rel > worst) {
      worst = rel;
      worst_i = i;
    }
  }
  std::cout << "gradcheck: " << params.flat.size() << " parameters, max relative error "
            << worst << " (parameter " << worst_i << ")\n";
  const bool pass = worst < 1e-4;
  std::cout << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

int cmd_psf_preview(const std::string& kind, double fwhm, double squeeze,
                    double axis, const std::string& out_path) {
  qsr::PsfSpec spec;
  spec.kind = qsr::psf_kind_from_string(kind);
  spec.fwhm_px = fwhm;
  spec.squeeze = squeeze;
  spec.axis_angle = axis;
  const qsr::Grid k = qsr::render_psf(spec);
  qsr::save_qsrt(out_path, k);
  qsr::save_pgm16(out_path + ".pgm", k);
  const double f_axis = qsr::measure_fwhm(k, axis);
  const double f_perp = qsr::measure_fwhm(k, axis + M_PI / 2);
  json rep{{"kind", kind},
           {"requested_fwhm", fwhm},
           {"squeeze", squeeze},
           {"support", k.rows()},
           {"sum", k.sum()},
           {"measured_fwhm_along_axis", f_axis},
           {"measured_fwhm_perpendicular", f_perp},
           {"anisotropy_ratio", f_axis / f_perp}};
  std::cout << rep.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-frame super-resolution toolkit for point emitters"};
  app.require_subcommand(1);

  std::string config_path, preset = "paper";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 1;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--preset", preset, "preset name: paper or toy");
  app.add_option("--seed", seed, "global seed")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--workers", workers, "worker count for data generation");

  auto* sim = app.add_subcommand("simulate", "generate a training archive");
  std::uint64_t sim_n = 0;
  std::string sim_out;
  sim->add_option("-n,--count", sim_n, "number of pairs")->required();
  sim->add_option("-o,--out", sim_out, "archive path")->required();

  auto* train = app.add_subcommand("train", "incremental training run");
  std::string train_out;
  train->add_option("-o,--out", train_out, "output directory")->required();

  auto* infer = app.add_subcommand("infer", "reconstruct one frame");
  std::string inf_weights, inf_input, inf_out;
  infer->add_option("-w,--weights", inf_weights)->required();
  infer->add_option("-i,--input", inf_input, "input frame (.qsrt)")->required();
  infer->add_option("-o,--out", inf_out)->required();

  auto* eval = app.add_subcommand("evaluate", "localization metrics report");
  std::string ev_weights, ev_recon, ev_archive, ev_out = "report.json";
  eval->add_option("-w,--weights", ev_weights, "weights (.qsrw)");
  eval->add_option("-r,--recon", ev_recon, "single reconstruction (.qsrt)");
  eval->add_option("-a,--archive", ev_archive, "truth archive")->required();
  eval->add_option("-o,--out", ev_out, "report path");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");

  auto* psf = app.add_subcommand("psf-preview", "render a PSF and measure it");
  std::string psf_kind = "gaussian", psf_out = "psf.qsrt";
  double psf_fwhm = 12, psf_squeeze = 1.0, psf_axis = 0.0;
  psf->add_option("--kind", psf_kind);
  psf->add_option("--fwhm", psf_fwhm, "high-res pixels");
  psf->add_option("--squeeze", psf_squeeze);
  psf->add_option("--axis", psf_axis, "radians");
  psf->add_option("-o,--out", psf_out);

  CLI11_PARSE(app, argc, argv);

  try {
    qsr::RunConfig cfg = qsr::load_run_config(preset, config_path);
    if (seed_set) cfg.seed = seed;

    if (sim->parsed()) return cmd_simulate(cfg, sim_n, sim_out);
    if (train->parsed()) return cmd_train(cfg, train_out);
    if (infer->parsed()) return cmd_infer(inf_weights, inf_input, inf_out);
    if (eval->parsed()) {
      if (ev_weights.empty() && ev_recon.empty())
        throw std::invalid_argument("evaluate: need --weights or --recon");
      return cmd_evaluate(cfg, ev_weights, ev_recon, ev_archive, ev_out);
    }
    if (grad->parsed()) return cmd_gradcheck();
    if (psf->parsed())
      return cmd_psf_preview(psf_kind, psf_fwhm, psf_squeeze, psf_axis, psf_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
