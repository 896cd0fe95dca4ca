#include <doctest.h>

#include <cmath>

#include "qsr/psf.hpp"

using qsr::Grid;
using qsr::PsfKind;
using qsr::PsfSpec;

TEST_CASE("gaussian sigma constant: fwhm 8 gives sigma 3.39728") {
  CHECK(8.0 / qsr::kFwhmPerSigma == doctest::Approx(3.39728).epsilon(1e-5));
}

TEST_CASE("rendered gaussian hits the requested FWHM within 2%") {
  for (double fwhm : {8.0, 12.0, 25.0, 40.0}) {
    PsfSpec spec;
    spec.fwhm_px = fwhm;
    const Grid k = qsr::render_psf(spec);
    const double measured = qsr::measure_fwhm(k, 0.0);
    CHECK(measured == doctest::Approx(fwhm).epsilon(0.02));
  }
}

TEST_CASE("rendered airy hits the requested FWHM within 2%") {
  for (double fwhm : {8.0, 16.0, 32.0}) {
    PsfSpec spec;
    spec.kind = PsfKind::airy;
    spec.fwhm_px = fwhm;
    const Grid k = qsr::render_psf(spec);
    const double measured = qsr::measure_fwhm(k, 0.3);
    CHECK(measured == doctest::Approx(fwhm).epsilon(0.02));
  }
}

TEST_CASE("airy first zero sits at 1.18533 x fwhm") {
  PsfSpec spec;
  spec.kind = PsfKind::airy;
  spec.fwhm_px = 10.0;
  const Grid k = qsr::render_psf(spec, 41);
  // walk outward along a row through the center and find the first
  // local minimum of the profile; for an Airy pattern it is the zero
  const double expect = 1.18533 * spec.fwhm_px;
  double prev = qsr::sample_profile(k, 0.0, 0.0);
  double zero_at = -1;
  for (double t = 0.05; t < 19.0; t += 0.05) {
    const double v = qsr::sample_profile(k, 0.0, t);
    if (v > prev && prev < 1e-4 * k.maxCoeff()) {
      zero_at = t - 0.05;
      break;
    }
    prev = v;
  }
  CHECK(zero_at == doctest::Approx(expect).epsilon(0.02));
}

TEST_CASE("squeeze narrows the profile along the axis only") {
  PsfSpec spec;
  spec.fwhm_px = 12.0;
  spec.squeeze = 0.7;
  spec.axis_angle = 0.4;
  const Grid k = qsr::render_psf(spec);
  const double along = qsr::measure_fwhm(k, spec.axis_angle);
  const double across = qsr::measure_fwhm(k, spec.axis_angle + M_PI / 2);
  CHECK(along == doctest::Approx(0.7 * 12.0).epsilon(0.03));
  CHECK(across == doctest::Approx(12.0).epsilon(0.03));
  CHECK(along / across == doctest::Approx(0.7).epsilon(0.03));
}

TEST_CASE("unsqueezed kernel ignores the axis angle") {
  PsfSpec a, b;
  a.fwhm_px = b.fwhm_px = 10.0;
  a.axis_angle = 0.0;
  b.axis_angle = 1.1;
  const Grid ka = qsr::render_psf(a, 33);
  const Grid kb = qsr::render_psf(b, 33);
  CHECK((ka - kb).abs().maxCoeff() < 1e-9);
}

TEST_CASE("kernels are normalized and non-negative for both kinds") {
  for (auto kind : {PsfKind::gaussian, PsfKind::airy}) {
    for (double fwhm : {8.0, 20.0, 40.0}) {
      for (double squeeze : {0.6, 1.0}) {
        PsfSpec spec;
        spec.kind = kind;
        spec.fwhm_px = fwhm;
        spec.squeeze = squeeze;
        const Grid k = qsr::render_psf(spec);
        CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(k.minCoeff() >= 0.0);
        CHECK(k.rows() % 2 == 1);
      }
    }
  }
}

TEST_CASE("render_psf rejects bad inputs") {
  PsfSpec spec;
  CHECK_THROWS_AS(qsr::render_psf(spec, 16), std::invalid_argument);  // even
  spec.fwhm_px = -3;
  CHECK_THROWS_AS(qsr::render_psf(spec), std::invalid_argument);
  spec.fwhm_px = 12;
  spec.squeeze = 0;
  CHECK_THROWS_AS(qsr::render_psf(spec), std::invalid_argument);
  spec.squeeze = 1;
  spec.kind = PsfKind::airy;
  // 9 px support cannot contain the first zero at ~14 px
  CHECK_THROWS_AS(qsr::render_psf(spec, 9), std::invalid_argument);
}

TEST_CASE("rayleigh conversion constant, linearity, and the paper scale") {
  CHECK(qsr::rayleigh_from_fwhm(1.0, PsfKind::airy) ==
        doctest::Approx(1.18533).epsilon(1e-4));
  CHECK(qsr::rayleigh_from_fwhm(2.0, PsfKind::airy) ==
        doctest::Approx(2.0 * qsr::rayleigh_from_fwhm(1.0, PsfKind::airy))
            .epsilon(1e-12));
  // 0.6665 um FWHM maps to the 0.79 um resolution limit scale
  CHECK(qsr::rayleigh_from_fwhm(0.6665, PsfKind::airy) ==
        doctest::Approx(0.790).epsilon(0.001));
  // gaussian uses the same convention
  CHECK(qsr::rayleigh_from_fwhm(5.0, PsfKind::gaussian) ==
        doctest::Approx(qsr::rayleigh_from_fwhm(5.0, PsfKind::airy))
            .epsilon(1e-12));
  CHECK_THROWS_AS(qsr::rayleigh_from_fwhm(0.0, PsfKind::airy),
                  std::invalid_argument);
}

TEST_CASE("default support is odd and covers 3 fwhm") {
  for (double fwhm : {8.0, 11.3, 40.0}) {
    const Eigen::Index s = qsr::default_psf_support(fwhm);
    CHECK(s % 2 == 1);
    CHECK(double(s) >= 3.0 * fwhm);
  }
}

TEST_CASE("kind string round trip") {
  CHECK(qsr::psf_kind_from_string("gaussian") == PsfKind::gaussian);
  CHECK(qsr::psf_kind_from_string("airy") == PsfKind::airy);
  CHECK(std::string(qsr::to_string(PsfKind::airy)) == "airy");
  CHECK_THROWS_AS(qsr::psf_kind_from_string("lorentzian"), std::invalid_argument);
}
