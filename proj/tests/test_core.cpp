#include <doctest.h>

#include <cmath>

#include "qsr/convolution.hpp"
#include "qsr/resample.hpp"
#include "qsr/rng.hpp"

using qsr::Grid;

namespace {

Grid random_grid(qsr::RngState& rng, Eigen::Index h, Eigen::Index w) {
  Grid g(h, w);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.uniform(-1, 1);
  return g;
}

// Quadruple-loop reference for "same" zero-padded convolution.
Grid convolve_reference(const Grid& img, const Grid& ker) {
  const Eigen::Index kr = (ker.rows() - 1) / 2, kc = (ker.cols() - 1) / 2;
  Grid out = Grid::Zero(img.rows(), img.cols());
  for (Eigen::Index i = 0; i < img.rows(); ++i)
    for (Eigen::Index j = 0; j < img.cols(); ++j)
      for (Eigen::Index u = -kr; u <= kr; ++u)
        for (Eigen::Index v = -kc; v <= kc; ++v) {
          const Eigen::Index si = i - u, sj = j - v;
          if (si < 0 || sj < 0 || si >= img.rows() || sj >= img.cols()) continue;
          out(i, j) += img(si, sj) * ker(u + kr, v + kc);
        }
  return out;
}

}  // namespace

TEST_CASE("convolve_direct reproduces the kernel from a delta") {
  Grid img = Grid::Zero(9, 9);
  img(4, 4) = 1.0;
  Grid ker(3, 3);
  ker << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Grid out = qsr::convolve_direct(img, ker);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      CHECK(out(3 + i, 3 + j) == doctest::Approx(ker(i, j)).epsilon(1e-12));
  CHECK(out(0, 0) == 0.0);
}

TEST_CASE("normalized kernel on a constant image keeps the interior flat") {
  const Grid img = Grid::Constant(10, 10, 1.0);
  Grid ker = Grid::Constant(3, 3, 1.0 / 9.0);
  const Grid out = qsr::convolve_direct(img, ker);
  for (Eigen::Index i = 1; i < 9; ++i)
    for (Eigen::Index j = 1; j < 9; ++j)
      CHECK(out(i, j) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("convolve_direct matches the brute-force sum") {
  auto rng = qsr::RngState::seeded(11);
  const Grid img = random_grid(rng, 8, 8);
  const Grid ker = random_grid(rng, 3, 3);
  const Grid a = qsr::convolve_direct(img, ker);
  const Grid b = convolve_reference(img, ker);
  CHECK((a - b).abs().maxCoeff() < 1e-12);
}

TEST_CASE("convolve rejects even kernels") {
  const Grid img = Grid::Zero(4, 4);
  CHECK_THROWS_AS(qsr::convolve_direct(img, Grid::Zero(2, 3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(qsr::convolve_fft(img, Grid::Zero(3, 4)),
                  std::invalid_argument);
}

TEST_CASE("convolve_fft equals convolve_direct on random instances") {
  auto rng = qsr::RngState::seeded(12);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index h = 1 + rng.uniform_int(64);
    const Eigen::Index w = 1 + rng.uniform_int(64);
    Eigen::Index kh = 1 + 2 * rng.uniform_int(5);
    Eigen::Index kw = 1 + 2 * rng.uniform_int(5);
    const Grid img = random_grid(rng, h, w);
    const Grid ker = random_grid(rng, kh, kw);
    const Grid a = qsr::convolve_fft(img, ker);
    const Grid b = qsr::convolve_direct(img, ker);
    const double scale = std::max(b.abs().maxCoeff(), 1e-30);
    CHECK((a - b).abs().maxCoeff() / scale < 1e-10);
  }
}

TEST_CASE("convolve_fft of a zero image is zero") {
  const Grid img = Grid::Zero(16, 16);
  Grid ker = Grid::Constant(5, 5, 0.04);
  CHECK(qsr::convolve_fft(img, ker).abs().maxCoeff() < 1e-14);
}

TEST_CASE("bin_sum sums blocks and conserves flux") {
  const Grid ones = Grid::Constant(4, 4, 1.0);
  const Grid b = qsr::bin_sum(ones, 4);
  CHECK(b.rows() == 1);
  CHECK(b(0, 0) == 16.0);

  auto rng = qsr::RngState::seeded(13);
  const Grid big = random_grid(rng, 200, 200);
  const Grid lo = qsr::bin_sum(big, 4);
  CHECK(lo.rows() == 50);
  CHECK(lo.cols() == 50);
  CHECK(lo.sum() == doctest::Approx(big.sum()).epsilon(1e-12));
}

TEST_CASE("bin_sum matches an explicit block-sum oracle") {
  auto rng = qsr::RngState::seeded(14);
  const Grid img = random_grid(rng, 8, 8);
  const Grid out = qsr::bin_sum(img, 2);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double expect = img(2 * i, 2 * j) + img(2 * i, 2 * j + 1) +
                            img(2 * i + 1, 2 * j) + img(2 * i + 1, 2 * j + 1);
      CHECK(out(i, j) == expect);  // identical summation order, bitwise
    }
}

TEST_CASE("bin_sum rejects non-divisible shapes") {
  CHECK_THROWS_AS(qsr::bin_sum(Grid(Grid::Zero(5, 4)), Eigen::Index(2)), std::invalid_argument);
  CHECK_THROWS_AS(qsr::bin_sum(Grid(Grid::Zero(4, 6)), Eigen::Index(4)), std::invalid_argument);
}

TEST_CASE("resize_bilinear_x2 keeps constants constant") {
  const Grid img = Grid::Constant(3, 5, 2.5);
  const Grid out = qsr::resize_bilinear_x2(img);
  CHECK(out.rows() == 6);
  CHECK(out.cols() == 10);
  CHECK((out - 2.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("resize_bilinear_x2 interpolates a 2x2 ramp per the sampling rule") {
  Grid img(2, 2);
  img << 0, 1, 0, 1;
  const Grid out = qsr::resize_bilinear_x2(img);
  // column sample j reads source coordinate j * (2-1)/(4-1) = j/3
  const double expect[4] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      CHECK(out(i, j) == doctest::Approx(expect[j]).epsilon(1e-12));
}

TEST_CASE("resize_bilinear_x2 of a 1x1 image is a constant 2x2") {
  Grid img(1, 1);
  img(0, 0) = 3.0;
  const Grid out = qsr::resize_bilinear_x2(img);
  CHECK(out.rows() == 2);
  CHECK((out - 3.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("resize adjoint satisfies the inner-product identity") {
  auto rng = qsr::RngState::seeded(15);
  const Grid x = random_grid(rng, 5, 7);
  const Grid y = random_grid(rng, 10, 14);
  const double a = (qsr::resize_bilinear_x2(x) * y).sum();
  const double b = (x * qsr::resize_bilinear_x2_adjoint(y, 5, 7)).sum();
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("gaussian_filter with tiny sigma is the identity") {
  auto rng = qsr::RngState::seeded(16);
  const Grid img = random_grid(rng, 12, 12);
  CHECK((qsr::gaussian_filter(img, 1e-3) - img).abs().maxCoeff() < 1e-6);
}

TEST_CASE("gaussian_filter rejects non-positive sigma") {
  CHECK_THROWS_AS(qsr::gaussian_filter(Grid(Grid::Zero(4, 4)), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(qsr::gaussian_filter(Grid(Grid::Zero(4, 4)), -1.0),
                  std::invalid_argument);
}

TEST_CASE("separable filter equals 2D convolution with the outer product") {
  auto rng = qsr::RngState::seeded(17);
  const Grid img = random_grid(rng, 20, 20);
  const double sigma = 1.5;
  const Eigen::VectorXd taps = qsr::gaussian_taps(sigma);
  const Grid ker2d = (taps * taps.transpose()).array();
  const Grid a = qsr::gaussian_filter(img, sigma);
  const Grid b = qsr::convolve_direct(img, ker2d);
  CHECK((a - b).abs().maxCoeff() < 1e-12);
}

TEST_CASE("gaussian_filter delta center value matches the 2D kernel") {
  const double sigma = 1.5;
  Grid img = Grid::Zero(31, 31);
  img(15, 15) = 1.0;
  const Grid out = qsr::gaussian_filter(img, sigma);
  const Eigen::VectorXd taps = qsr::gaussian_taps(sigma);
  const Eigen::Index c = (taps.size() - 1) / 2;
  CHECK(out(15, 15) == doctest::Approx(taps(c) * taps(c)).epsilon(1e-12));
}

TEST_CASE("gaussian_filter conserves interior flux") {
  Grid img = Grid::Zero(41, 41);
  img(20, 20) = 7.0;
  img(18, 22) = 3.0;
  const Grid out = qsr::gaussian_filter(img, 1.5);
  CHECK(out.sum() == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("gaussian_taps are normalized with radius ceil(4 sigma)") {
  const Eigen::VectorXd taps = qsr::gaussian_taps(2.0);
  CHECK(taps.size() == 2 * 8 + 1);
  CHECK(taps.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(taps.minCoeff() > 0.0);
}
