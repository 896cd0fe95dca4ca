#include "qsr/scene.hpp"

#include <cmath>
#include <stdexcept>

#include "qsr/convolution.hpp"
#include "qsr/resample.hpp"

namespace qsr {

void SceneConfig::validate() const {
  if (hi_size != 4 * lo_size)
    throw std::invalid_argument("scene: hi_size must equal 4 * lo_size");
  if (n_emitters_min < 1 || n_emitters_max < n_emitters_min)
    throw std::invalid_argument("scene: bad emitter count range");
  if (!(fwhm_min > 0) || fwhm_max < fwhm_min)
    throw std::invalid_argument("scene: bad fwhm range");
  if (!(intensity_min > 0) || intensity_max <= intensity_min)
    throw std::invalid_argument("scene: bad intensity range");
  if (background_min < 0 || background_max < background_min)
    throw std::invalid_argument("scene: bad background range");
  if (!(squeeze_min > 0 && squeeze_min <= 1))
    throw std::invalid_argument("scene: squeeze_min must be in (0, 1]");
  if (cluster_fraction < 0 || cluster_fraction > 1)
    throw std::invalid_argument("scene: cluster_fraction must be in [0, 1]");
  if (!use_gaussian && !use_airy)
    throw std::invalid_argument("scene: at least one PSF kind required");
}

SampledScene sample_scene(RngState& rng, const SceneConfig& config) {
  config.validate();
  SampledScene s;
  s.emitters.grid_hi = config.hi_size;
  s.emitters.grid_lo = config.lo_size;

  const int n = config.n_emitters_min +
                static_cast<int>(rng.uniform_int(
                    config.n_emitters_max - config.n_emitters_min + 1));

  // PSF before positions: clustered placement scales with the blur width
  if (config.use_gaussian && config.use_airy)
    s.psf.kind = rng.uniform_int(2) == 0 ? PsfKind::gaussian : PsfKind::airy;
  else
    s.psf.kind = config.use_gaussian ? PsfKind::gaussian : PsfKind::airy;
  s.psf.fwhm_px = rng.uniform(config.fwhm_min, config.fwhm_max);
  s.psf.squeeze = rng.uniform(config.squeeze_min, 1.0);
  s.psf.axis_angle = rng.uniform(0.0, M_PI);
  s.background_mean = rng.uniform(config.background_min, config.background_max);

  const double log_lo = std::log(config.intensity_min);
  const double log_hi = std::log(config.intensity_max);
  const double span = double(config.hi_size);
  s.emitters.emitters.reserve(n);
  for (int i = 0; i < n; ++i) {
    Emitter e;
    if (i > 0 && rng.uniform() < config.cluster_fraction) {
      const Emitter& prev = s.emitters.emitters.back();
      const double angle = rng.uniform(0.0, 2.0 * M_PI);
      const double dist = s.psf.fwhm_px * rng.uniform(0.4, 1.4);
      e.x = std::clamp(prev.x + dist * std::cos(angle), 0.0, span - 1.0);
      e.y = std::clamp(prev.y + dist * std::sin(angle), 0.0, span - 1.0);
    } else {
      e.x = rng.uniform(0.0, span);
      e.y = rng.uniform(0.0, span);
    }
    e.mean_photons = std::exp(rng.uniform(log_lo, log_hi));
    s.emitters.emitters.push_back(e);
  }
  return s;
}

Grid rasterize_ground_truth(RngState& rng, const EmitterSet& emitters) {
  const Eigen::Index n = emitters.grid_hi;
  Grid truth = Grid::Zero(n, n);
  for (const Emitter& e : emitters.emitters) {
    Eigen::Index col = static_cast<Eigen::Index>(std::llround(e.x));
    Eigen::Index row = static_cast<Eigen::Index>(std::llround(e.y));
    col = std::clamp<Eigen::Index>(col, 0, n - 1);
    row = std::clamp<Eigen::Index>(row, 0, n - 1);
    truth(row, col) += double(poisson_sample(rng, e.mean_photons));
  }
  return truth;
}

Grid synthesize_frame_noiseless(const Grid& truth, const Grid& psf,
                                double background_mean) {
  Grid low = bin_sum(convolve_fft(truth, psf), 4);
  // FFT roundoff can leave tiny negative values; Poisson means must be >= 0
  low = (low < 0.0).select(0.0, low);
  return low + background_mean;
}

Grid synthesize_frame(RngState& rng, const Grid& truth, const Grid& psf,
                      double background_mean) {
  if (background_mean < 0 || !std::isfinite(background_mean))
    throw std::invalid_argument("synthesize_frame: bad background mean");
  Grid low = synthesize_frame_noiseless(truth, psf, background_mean);
  for (Eigen::Index i = 0; i < low.rows(); ++i)
    for (Eigen::Index j = 0; j < low.cols(); ++j)
      low(i, j) = double(poisson_sample(rng, low(i, j)));
  return low;
}

}  // namespace qsr
