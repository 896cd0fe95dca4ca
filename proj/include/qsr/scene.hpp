#ifndef QSR_SCENE_HPP
#define QSR_SCENE_HPP

#include <vector>

#include "qsr/grid.hpp"
#include "qsr/psf.hpp"
#include "qsr/rng.hpp"

namespace qsr {

struct Emitter {
  double x = 0;  // high-res pixel column
  double y = 0;  // high-res pixel row
  double mean_photons = 0;
};

struct EmitterSet {
  std::vector<Emitter> emitters;
  Eigen::Index grid_hi = 200;
  Eigen::Index grid_lo = 50;
};

struct SceneConfig {
  Eigen::Index hi_size = 200;
  Eigen::Index lo_size = 50;
  int n_emitters_min = 1;
  int n_emitters_max = 15;
  double fwhm_min = 8.0;    // high-res pixels
  double fwhm_max = 40.0;
  double intensity_min = 1.0;    // mean photons, sampled log-uniformly
  double intensity_max = 1e4;
  double background_min = 1.0;   // photons per low-res pixel
  double background_max = 100.0;
  double squeeze_min = 0.6;
  // Probability that an emitter is placed within ~one FWHM of the
  // previous one instead of uniformly; exposes sub-Rayleigh pairs
  // during training so the network learns to split them.
  double cluster_fraction = 0.0;
  bool use_gaussian = true;
  bool use_airy = true;

  void validate() const;
};

struct SampledScene {
  EmitterSet emitters;
  PsfSpec psf;
  double background_mean = 0;
};

// Draws one random optical configuration: emitter count and positions,
// log-uniform intensities, PSF kind/FWHM/squeeze/axis, background.
SampledScene sample_scene(RngState& rng, const SceneConfig& config);

// Point-like ground truth: each emitter deposits a Poisson draw of its
// mean at the nearest integer pixel; coincident emitters accumulate.
Grid rasterize_ground_truth(RngState& rng, const EmitterSet& emitters);

// Blur, 4x bin to the low-res grid, then per-pixel Poisson shot noise
// on signal + background.
Grid synthesize_frame(RngState& rng, const Grid& truth, const Grid& psf,
                      double background_mean);

// Test hook: same pipeline with the Poisson step replaced by identity.
Grid synthesize_frame_noiseless(const Grid& truth, const Grid& psf,
                                double background_mean);

}  // namespace qsr

#endif
