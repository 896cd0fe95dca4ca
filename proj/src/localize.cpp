#include "qsr/localize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "qsr/psf.hpp"

namespace qsr {

using nlohmann::json;

std::vector<EmitterEstimate> find_peaks(const Grid& recon, double mass_threshold,
                                        double min_separation_px) {
  const Eigen::Index h = recon.rows(), w = recon.cols();
  std::vector<EmitterEstimate> maxima;
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      const double v = recon(i, j);
      if (v <= mass_threshold) continue;
      bool is_max = true;
      for (Eigen::Index di = -1; di <= 1 && is_max; ++di)
        for (Eigen::Index dj = -1; dj <= 1 && is_max; ++dj) {
          if (di == 0 && dj == 0) continue;
          const Eigen::Index ni = i + di, nj = j + dj;
          if (ni < 0 || nj < 0 || ni >= h || nj >= w) continue;
          if (recon(ni, nj) > v) is_max = false;
          // ties resolved toward the first pixel in row-major order
          if (recon(ni, nj) == v && (ni < i || (ni == i && nj < j)))
            is_max = false;
        }
      if (is_max) maxima.push_back({double(j), double(i), v, 3.0});
    }
  }
  std::sort(maxima.begin(), maxima.end(), [](const auto& a, const auto& b) {
    return a.mass != b.mass ? a.mass > b.mass
                            : std::tie(a.y, a.x) < std::tie(b.y, b.x);
  });

  std::vector<EmitterEstimate> kept;
  for (const auto& m : maxima) {
    bool ok = true;
    for (const auto& k : kept)
      if (std::hypot(m.x - k.x, m.y - k.y) < min_separation_px) {
        ok = false;
        break;
      }
    if (!ok) continue;

    // centroid refinement over a radius-3 neighborhood
    const Eigen::Index ci = Eigen::Index(m.y), cj = Eigen::Index(m.x);
    double mass = 0, sx = 0, sy = 0;
    for (Eigen::Index di = -3; di <= 3; ++di)
      for (Eigen::Index dj = -3; dj <= 3; ++dj) {
        const Eigen::Index ni = ci + di, nj = cj + dj;
        if (ni < 0 || nj < 0 || ni >= h || nj >= w) continue;
        if (di * di + dj * dj > 9) continue;
        const double v = recon(ni, nj);
        mass += v;
        sx += v * double(nj);
        sy += v * double(ni);
      }
    EmitterEstimate e = m;
    if (mass > 0) {
      e.x = sx / mass;
      e.y = sy / mass;
      e.mass = mass;
    }
    kept.push_back(e);
  }
  std::sort(kept.begin(), kept.end(),
            [](const auto& a, const auto& b) { return a.mass > b.mass; });
  return kept;
}

MatchStats match_and_distances(const std::vector<EmitterEstimate>& est,
                               const EmitterSet& truth,
                               const PixelCalibration& cal) {
  if (est.empty() || truth.emitters.empty())
    throw std::invalid_argument("match_and_distances: both sets must be non-empty");
  struct Cand {
    double d;
    std::size_t e, t;
  };
  std::vector<Cand> cands;
  for (std::size_t e = 0; e < est.size(); ++e)
    for (std::size_t t = 0; t < truth.emitters.size(); ++t)
      cands.push_back({std::hypot(est[e].x - truth.emitters[t].x,
                                  est[e].y - truth.emitters[t].y),
                       e, t});
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.d != b.d ? a.d < b.d : std::tie(a.e, a.t) < std::tie(b.e, b.t);
  });

  std::vector<bool> e_used(est.size(), false), t_used(truth.emitters.size(), false);
  MatchStats s;
  s.unit = cal.unit();
  for (const Cand& c : cands) {
    if (e_used[c.e] || t_used[c.t]) continue;
    e_used[c.e] = true;
    t_used[c.t] = true;
    s.pairs.push_back({c.e, c.t, cal.to_units(c.d)});
  }
  for (const auto& p : s.pairs) {
    s.mean_distance += p.distance;
    s.max_distance = std::max(s.max_distance, p.distance);
  }
  if (!s.pairs.empty()) s.mean_distance /= double(s.pairs.size());
  s.unmatched_estimates = est.size() - s.pairs.size();
  s.unmatched_truth = truth.emitters.size() - s.pairs.size();
  return s;
}

LineFit line_fit_tls(const std::vector<std::pair<double, double>>& points,
                     const PixelCalibration& cal) {
  if (points.size() < 3)
    throw std::invalid_argument("line_fit_tls: need at least 3 points");
  double cx = 0, cy = 0;
  for (const auto& [x, y] : points) {
    cx += x;
    cy += y;
  }
  cx /= double(points.size());
  cy /= double(points.size());

  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& [x, y] : points) {
    const double dx = x - cx, dy = y - cy;
    cov(0, 0) += dx * dx;
    cov(0, 1) += dx * dy;
    cov(1, 1) += dy * dy;
  }
  cov(1, 0) = cov(0, 1);
  if (cov.trace() <= 0)
    throw std::invalid_argument("line_fit_tls: degenerate point set");

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const Eigen::Vector2d dir = es.eigenvectors().col(1);  // largest eigenvalue

  LineFit f;
  f.dir_x = dir.x();
  f.dir_y = dir.y();
  f.point_x = cx;
  f.point_y = cy;
  f.unit = cal.unit();
  for (const auto& [x, y] : points) {
    const double a = -dir.y() * (x - cx);
    const double b = dir.x() * (y - cy);
    double perp = std::abs(a + b);
    // a + b cancels exactly only by luck; deviations below the rounding-error
    // bound of the two products are indistinguishable from collinear, so
    // report them as exactly zero.
    const double noise =
        4.0 * std::numeric_limits<double>::epsilon() * (std::abs(a) + std::abs(b));
    if (perp <= noise) perp = 0.0;
    f.deviations.push_back(cal.to_units(perp));
  }
  f.mean_deviation =
      std::accumulate(f.deviations.begin(), f.deviations.end(), 0.0) /
      double(f.deviations.size());
  return f;
}

BlinkLocalization frame_difference_localize(const Grid& frame_a,
                                            const Grid& frame_b) {
  if (frame_a.rows() != frame_b.rows() || frame_a.cols() != frame_b.cols())
    throw std::invalid_argument("frame_difference_localize: shape mismatch");
  const Grid d = frame_a - frame_b;

  // robust noise scale: 1.4826 * median absolute deviation
  std::vector<double> mag(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) mag[i] = d.data()[i];
  std::nth_element(mag.begin(), mag.begin() + mag.size() / 2, mag.end());
  const double med = mag[mag.size() / 2];
  for (auto& v : mag) v = std::abs(v - med);
  std::nth_element(mag.begin(), mag.begin() + mag.size() / 2, mag.end());
  const double scale = 1.4826 * mag[mag.size() / 2];

  BlinkLocalization out;
  out.noise_scale = scale;

  Eigen::Index pi = 0, pj = 0;
  const double peak = d.maxCoeff(&pi, &pj);
  if (!(peak > 5.0 * scale) || peak <= 0) return out;  // no blinking event

  // rough blob width from second moments above the half-peak level
  double mass = 0, mx = 0, my = 0, var = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      const double v = d(i, j);
      if (v < 0.5 * peak) continue;
      mass += v;
      mx += v * double(j);
      my += v * double(i);
    }
  mx /= mass;
  my /= mass;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      const double v = d(i, j);
      if (v < 0.5 * peak) continue;
      var += v * (std::pow(double(j) - mx, 2) + std::pow(double(i) - my, 2));
    }
  var /= 2.0 * mass;
  const double fwhm_est =
      std::max(2.0, kFwhmPerSigma * std::sqrt(std::max(var, 0.25)) * 2.0);

  const auto half = Eigen::Index(std::ceil(1.5 * fwhm_est));
  Roi roi;
  roi.row0 = std::max<Eigen::Index>(0, pi - half);
  roi.col0 = std::max<Eigen::Index>(0, pj - half);
  roi.rows = std::min(d.rows(), pi + half + 1) - roi.row0;
  roi.cols = std::min(d.cols(), pj + half + 1) - roi.col0;
  if (roi.rows < 7) {
    roi.row0 = std::max<Eigen::Index>(0, std::min(d.rows() - 7, roi.row0 - (7 - roi.rows) / 2));
    roi.rows = std::min<Eigen::Index>(7, d.rows() - roi.row0);
  }
  if (roi.cols < 7) {
    roi.col0 = std::max<Eigen::Index>(0, std::min(d.cols() - 7, roi.col0 - (7 - roi.cols) / 2));
    roi.cols = std::min<Eigen::Index>(7, d.cols() - roi.col0);
  }

  out.fit = fit_gaussian_2d(d, roi);
  out.event = true;
  return out;
}

json evaluate_reconstruction(const Grid& recon, const EmitterSet& truth,
                             const PixelCalibration& cal, const EvalConfig& cfg) {
  const double mass = recon.sum();
  if (std::abs(mass - 1.0) > 1e-3)
    throw std::invalid_argument("evaluate_reconstruction: recon must be unit-mass");

  const auto peaks = find_peaks(recon, cfg.mass_threshold, cfg.min_separation_px);

  json rep;
  rep["unit"] = cal.unit();
  rep["n_truth"] = truth.emitters.size();
  rep["n_estimates"] = peaks.size();
  json jpeaks = json::array();
  for (const auto& p : peaks)
    jpeaks.push_back({{"x", p.x}, {"y", p.y}, {"mass", p.mass}});
  rep["estimates"] = jpeaks;

  if (peaks.empty()) {
    rep["failed"] = true;
    rep["reason"] = "no peaks above threshold";
    return rep;
  }
  rep["failed"] = false;

  const MatchStats m = match_and_distances(peaks, truth, cal);
  rep["matched"] = m.pairs.size();
  rep["unmatched_estimates"] = m.unmatched_estimates;
  rep["unmatched_truth"] = m.unmatched_truth;
  rep["mean_distance"] = m.mean_distance;
  rep["max_distance"] = m.max_distance;

  if (cfg.psf_fwhm_hi_px > 0) {
    const double rayleigh =
        cal.to_units(rayleigh_from_fwhm(cfg.psf_fwhm_hi_px, PsfKind::airy));
    rep["rayleigh_limit"] = rayleigh;
    rep["rayleigh_ratio"] = rayleigh > 0 ? m.mean_distance / rayleigh : 0.0;
    rep["rayleigh_convention"] =
        "airy first-zero/half-max ratio, applied to gaussian PSFs by convention";
  }

  if (cfg.fit_line && peaks.size() >= 3) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : peaks) pts.emplace_back(p.x, p.y);
    const LineFit lf = line_fit_tls(pts, cal);
    rep["line_mean_deviation"] = lf.mean_deviation;
    rep["line_direction"] = {lf.dir_x, lf.dir_y};
  }
  return rep;
}

void write_report_csv(const std::string& path, const json& report) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "metric,value\n";
  for (const auto& [key, val] : report.items()) {
    if (val.is_number() || val.is_boolean() || val.is_string())
      os << key << ',' << (val.is_string() ? val.get<std::string>() : val.dump())
         << '\n';
  }
}

}  // namespace qsr
