#ifndef QSR_LOCALIZE_HPP
#define QSR_LOCALIZE_HPP

#include <json.hpp>

#include <optional>
#include <vector>

#include "qsr/gaussfit.hpp"
#include "qsr/grid.hpp"
#include "qsr/scene.hpp"

namespace qsr {

struct PixelCalibration {
  double nm_per_hires_pixel = 0;  // <= 0 means uncalibrated, report in px
  bool calibrated() const { return nm_per_hires_pixel > 0; }
  double to_units(double px) const {
    return calibrated() ? px * nm_per_hires_pixel : px;
  }
  const char* unit() const { return calibrated() ? "nm" : "px"; }
};

struct EmitterEstimate {
  double x = 0, y = 0;       // high-res pixels
  double mass = 0;           // probability mass at the refined peak
  double support_radius = 3;
};

// Local maxima above mass_threshold, greedily pruned to
// min_separation_px (brightest first), centers refined by an
// intensity-weighted centroid over a radius-3 neighborhood. Sorted by
// mass, descending.
std::vector<EmitterEstimate> find_peaks(const Grid& recon, double mass_threshold,
                                        double min_separation_px);

struct MatchStats {
  struct Pair {
    std::size_t est_index, truth_index;
    double distance;  // calibrated units
  };
  std::vector<Pair> pairs;
  double mean_distance = 0;
  double max_distance = 0;
  std::size_t unmatched_estimates = 0;
  std::size_t unmatched_truth = 0;
  std::string unit;
};

// Greedy matching, globally smallest distance first.
MatchStats match_and_distances(const std::vector<EmitterEstimate>& est,
                               const EmitterSet& truth,
                               const PixelCalibration& cal);

struct LineFit {
  double dir_x = 0, dir_y = 0;       // unit direction
  double point_x = 0, point_y = 0;   // centroid on the line
  double mean_deviation = 0;         // calibrated units
  std::vector<double> deviations;
  std::string unit;
};

// Total-least-squares line: principal direction of the centered cloud,
// deviations are perpendicular distances.
LineFit line_fit_tls(const std::vector<std::pair<double, double>>& points,
                     const PixelCalibration& cal);

struct BlinkLocalization {
  bool event = false;        // false: difference indistinguishable from noise
  double noise_scale = 0;    // robust (MAD-based) scale of the difference
  GaussFitResult fit;        // valid only when event is true
};

// Localizes an emitter that disappeared between two registered frames
// by fitting the dominant positive blob of frame_a - frame_b.
BlinkLocalization frame_difference_localize(const Grid& frame_a,
                                            const Grid& frame_b);

struct EvalConfig {
  double mass_threshold = 1e-4;
  double min_separation_px = 4.0;
  double psf_fwhm_hi_px = 0;  // > 0 adds the Rayleigh ratio to the report
  bool fit_line = false;
};

// Aggregated reconstruction report: peak extraction, matching stats,
// optional collinearity fit, optional Rayleigh ratio.
nlohmann::json evaluate_reconstruction(const Grid& recon, const EmitterSet& truth,
                                       const PixelCalibration& cal,
                                       const EvalConfig& cfg);

void write_report_csv(const std::string& path, const nlohmann::json& report);

}  // namespace qsr

#endif
