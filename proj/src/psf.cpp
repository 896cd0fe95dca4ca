#include "qsr/psf.hpp"

#include <cmath>
#include <string>

namespace qsr {
namespace {

double airy_intensity(double v) {
  if (v < 1e-8) {
    // series: 2 J1(v)/v = 1 - v^2/8 + v^4/192 - ...
    const double t = 1.0 - v * v / 8.0;
    return t * t;
  }
  const double t = 2.0 * std::cyl_bessel_j(1, v) / v;
  return t * t;
}

}  // namespace

Eigen::Index default_psf_support(double fwhm_px) {
  auto s = static_cast<Eigen::Index>(std::ceil(3.0 * fwhm_px));
  if (s % 2 == 0) ++s;
  return s;
}

Grid render_psf(const PsfSpec& spec) {
  return render_psf(spec, default_psf_support(spec.fwhm_px));
}

Grid render_psf(const PsfSpec& spec, Eigen::Index support) {
  if (support % 2 == 0) throw std::invalid_argument("render_psf: support must be odd");
  if (!(spec.fwhm_px > 0)) throw std::invalid_argument("render_psf: fwhm must be > 0");
  if (!(spec.squeeze > 0 && spec.squeeze <= 1))
    throw std::invalid_argument("render_psf: squeeze must be in (0, 1]");

  const double c = spec.kind == PsfKind::airy
                       ? 2.0 * kAiryHalfMax / spec.fwhm_px
                       : 0.0;
  if (spec.kind == PsfKind::airy) {
    const double first_zero_r = kAiryFirstZero / c;
    if (double(support - 1) / 2.0 < first_zero_r)
      throw std::invalid_argument(
          "render_psf: support too small to contain the first Airy zero");
  }
  const double sigma = spec.fwhm_px / kFwhmPerSigma;

  const Eigen::Index r = (support - 1) / 2;
  const double ca = std::cos(spec.axis_angle), sa = std::sin(spec.axis_angle);
  Grid out(support, support);
  for (Eigen::Index i = 0; i < support; ++i) {
    const double y = double(i - r);
    for (Eigen::Index j = 0; j < support; ++j) {
      const double x = double(j - r);
      // stretch the squeeze-axis component so the profile narrows by s
      const double u = (x * ca + y * sa) / spec.squeeze;
      const double w = -x * sa + y * ca;
      const double rad = std::hypot(u, w);
      out(i, j) = spec.kind == PsfKind::gaussian
                      ? std::exp(-0.5 * rad * rad / (sigma * sigma))
                      : airy_intensity(c * rad);
    }
  }
  out /= out.sum();
  return out;
}

double rayleigh_from_fwhm(double fwhm, PsfKind /*kind*/) {
  if (!(fwhm > 0)) throw std::invalid_argument("rayleigh_from_fwhm: fwhm must be > 0");
  return fwhm * kAiryFirstZero / (2.0 * kAiryHalfMax);
}

double sample_profile(const Grid& kernel, double angle, double t) {
  const double r = double(kernel.rows() - 1) / 2.0;
  const double x = r + t * std::cos(angle);
  const double y = r + t * std::sin(angle);
  if (x < 0 || y < 0 || x > kernel.cols() - 1 || y > kernel.rows() - 1) return 0.0;
  const auto x0 = static_cast<Eigen::Index>(x), y0 = static_cast<Eigen::Index>(y);
  const Eigen::Index x1 = std::min(x0 + 1, kernel.cols() - 1);
  const Eigen::Index y1 = std::min(y0 + 1, kernel.rows() - 1);
  const double wx = x - double(x0), wy = y - double(y0);
  return (1 - wy) * ((1 - wx) * kernel(y0, x0) + wx * kernel(y0, x1)) +
         wy * ((1 - wx) * kernel(y1, x0) + wx * kernel(y1, x1));
}

double measure_fwhm(const Grid& kernel, double angle) {
  const double rmax = double(kernel.rows() - 1) / 2.0;
  const double peak = sample_profile(kernel, angle, 0.0);
  const double half = peak / 2.0;
  const double step = 0.01;
  double width = 0.0;
  for (int sign = -1; sign <= 1; sign += 2) {
    double prev = peak;
    double cross = rmax;
    for (double t = step; t <= rmax; t += step) {
      const double v = sample_profile(kernel, angle, sign * t);
      if (v <= half) {
        cross = t - step + step * (prev - half) / std::max(prev - v, 1e-300);
        break;
      }
      prev = v;
    }
    width += cross;
  }
  return width;
}

const char* to_string(PsfKind kind) {
  return kind == PsfKind::gaussian ? "gaussian" : "airy";
}

PsfKind psf_kind_from_string(const std::string& s) {
  if (s == "gaussian") return PsfKind::gaussian;
  if (s == "airy") return PsfKind::airy;
  throw std::invalid_argument("unknown PSF kind: " + s);
}

}  // namespace qsr
