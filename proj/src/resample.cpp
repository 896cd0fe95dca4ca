#include "qsr/resample.hpp"

#include <cmath>

namespace qsr {

Eigen::VectorXd gaussian_taps(double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("gaussian taps: sigma must be > 0");
  const Eigen::Index r = static_cast<Eigen::Index>(std::ceil(4.0 * sigma));
  Eigen::VectorXd taps(2 * r + 1);
  for (Eigen::Index i = -r; i <= r; ++i)
    taps(i + r) = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
  taps /= taps.sum();
  return taps;
}

namespace {

template <typename Scalar>
GridT<Scalar> blur_impl(const GridT<Scalar>& image, double sigma) {
  const Eigen::VectorXd taps64 = gaussian_taps(sigma);
  const Eigen::Index r = (taps64.size() - 1) / 2;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> taps = taps64.cast<Scalar>();
  const Eigen::Index h = image.rows(), w = image.cols();

  // rows pass
  GridT<Scalar> tmp = GridT<Scalar>::Zero(h, w);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      Scalar s = 0;
      const Eigen::Index v0 = std::max<Eigen::Index>(-r, -j);
      const Eigen::Index v1 = std::min<Eigen::Index>(r, w - 1 - j);
      for (Eigen::Index v = v0; v <= v1; ++v) s += taps(v + r) * image(i, j + v);
      tmp(i, j) = s;
    }
  }
  // cols pass
  GridT<Scalar> out = GridT<Scalar>::Zero(h, w);
  for (Eigen::Index j = 0; j < w; ++j) {
    for (Eigen::Index i = 0; i < h; ++i) {
      Scalar s = 0;
      const Eigen::Index u0 = std::max<Eigen::Index>(-r, -i);
      const Eigen::Index u1 = std::min<Eigen::Index>(r, h - 1 - i);
      for (Eigen::Index u = u0; u <= u1; ++u) s += taps(u + r) * tmp(i + u, j);
      out(i, j) = s;
    }
  }
  return out;
}

}  // namespace

Grid gaussian_filter(const Grid& image, double sigma) { return blur_impl(image, sigma); }
GridF gaussian_filter(const GridF& image, double sigma) { return blur_impl(image, sigma); }

}  // namespace qsr
