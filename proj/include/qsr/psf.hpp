#ifndef QSR_PSF_HPP
#define QSR_PSF_HPP

#include <string>

#include "qsr/grid.hpp"

namespace qsr {

// FWHM = kFwhmPerSigma * sigma for a Gaussian profile.
inline constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

// Airy intensity [2 J1(v)/v]^2: half-max argument and first zero of J1.
inline constexpr double kAiryHalfMax = 1.61634;
inline constexpr double kAiryFirstZero = 3.8317059702075125;

enum class PsfKind { gaussian, airy };

struct PsfSpec {
  PsfKind kind = PsfKind::gaussian;
  double fwhm_px = 12.0;       // high-resolution pixels
  double squeeze = 1.0;        // width scale in (0, 1] along the squeeze axis
  double axis_angle = 0.0;     // radians in [0, pi)
};

// Smallest odd support that fits the rendered profile for this FWHM.
Eigen::Index default_psf_support(double fwhm_px);

// Rasterizes the PSF on an odd support x support grid, squeeze applied
// by stretching coordinates 1/squeeze along the axis, then normalizes
// to unit flux.
Grid render_psf(const PsfSpec& spec, Eigen::Index support);
Grid render_psf(const PsfSpec& spec);  // default support

// Rayleigh separation for a profile of the given FWHM. The Airy
// first-zero/half-max ratio is used for both kinds; for a Gaussian PSF
// this is a convention, flagged as such in reports.
double rayleigh_from_fwhm(double fwhm, PsfKind kind);

const char* to_string(PsfKind kind);
PsfKind psf_kind_from_string(const std::string& s);

// Bilinear sample of a centered kernel profile at signed distance t
// along the given axis.
double sample_profile(const Grid& kernel, double angle, double t);

// Full width at half maximum of the rendered kernel measured along an
// axis through the center.
double measure_fwhm(const Grid& kernel, double angle);

}  // namespace qsr

#endif
