#ifndef QSR_RESAMPLE_HPP
#define QSR_RESAMPLE_HPP

#include "qsr/grid.hpp"

namespace qsr {

// Block-sum downsampling. Each output pixel is the sum of a
// factor x factor block, accumulated in row-major order within the
// block, so total flux is conserved exactly and reproducibly.
template <typename Scalar>
GridT<Scalar> bin_sum(const GridT<Scalar>& image, Eigen::Index factor) {
  if (factor <= 0) throw std::invalid_argument("bin_sum: factor must be positive");
  if (image.rows() % factor != 0 || image.cols() % factor != 0)
    throw std::invalid_argument("bin_sum: image extents not divisible by factor");
  const Eigen::Index oh = image.rows() / factor, ow = image.cols() / factor;
  GridT<Scalar> out(oh, ow);
  for (Eigen::Index i = 0; i < oh; ++i) {
    for (Eigen::Index j = 0; j < ow; ++j) {
      Scalar s = 0;
      for (Eigen::Index u = 0; u < factor; ++u)
        for (Eigen::Index v = 0; v < factor; ++v)
          s += image(i * factor + u, j * factor + v);
      out(i, j) = s;
    }
  }
  return out;
}

// Corner-aligned doubling: output sample i reads source coordinate
// i * (n_in - 1) / (n_out - 1), so the first and last samples coincide
// with the input corners and constants stay constant. A 1x1 input maps
// to a constant 2x2 output.
template <typename Scalar>
GridT<Scalar> resize_bilinear_x2(const GridT<Scalar>& image) {
  const Eigen::Index h = image.rows(), w = image.cols();
  const Eigen::Index oh = 2 * h, ow = 2 * w;
  const double sy = oh > 1 && h > 1 ? double(h - 1) / double(oh - 1) : 0.0;
  const double sx = ow > 1 && w > 1 ? double(w - 1) / double(ow - 1) : 0.0;
  GridT<Scalar> out(oh, ow);
  for (Eigen::Index i = 0; i < oh; ++i) {
    const double fy = i * sy;
    const Eigen::Index y0 = static_cast<Eigen::Index>(fy);
    const Eigen::Index y1 = std::min(y0 + 1, h - 1);
    const Scalar wy = static_cast<Scalar>(fy - y0);
    for (Eigen::Index j = 0; j < ow; ++j) {
      const double fx = j * sx;
      const Eigen::Index x0 = static_cast<Eigen::Index>(fx);
      const Eigen::Index x1 = std::min(x0 + 1, w - 1);
      const Scalar wx = static_cast<Scalar>(fx - x0);
      out(i, j) = (1 - wy) * ((1 - wx) * image(y0, x0) + wx * image(y0, x1)) +
                  wy * ((1 - wx) * image(y1, x0) + wx * image(y1, x1));
    }
  }
  return out;
}

// Adjoint of resize_bilinear_x2: scatters each output-gradient sample
// back to the four source pixels with the same bilinear weights.
template <typename Scalar>
GridT<Scalar> resize_bilinear_x2_adjoint(const GridT<Scalar>& grad_out,
                                         Eigen::Index h, Eigen::Index w) {
  const Eigen::Index oh = grad_out.rows(), ow = grad_out.cols();
  if (oh != 2 * h || ow != 2 * w)
    throw std::invalid_argument("resize adjoint: shape mismatch");
  const double sy = oh > 1 && h > 1 ? double(h - 1) / double(oh - 1) : 0.0;
  const double sx = ow > 1 && w > 1 ? double(w - 1) / double(ow - 1) : 0.0;
  GridT<Scalar> out = GridT<Scalar>::Zero(h, w);
  for (Eigen::Index i = 0; i < oh; ++i) {
    const double fy = i * sy;
    const Eigen::Index y0 = static_cast<Eigen::Index>(fy);
    const Eigen::Index y1 = std::min(y0 + 1, h - 1);
    const Scalar wy = static_cast<Scalar>(fy - y0);
    for (Eigen::Index j = 0; j < ow; ++j) {
      const double fx = j * sx;
      const Eigen::Index x0 = static_cast<Eigen::Index>(fx);
      const Eigen::Index x1 = std::min(x0 + 1, w - 1);
      const Scalar wx = static_cast<Scalar>(fx - x0);
      const Scalar g = grad_out(i, j);
      out(y0, x0) += (1 - wy) * (1 - wx) * g;
      out(y0, x1) += (1 - wy) * wx * g;
      out(y1, x0) += wy * (1 - wx) * g;
      out(y1, x1) += wy * wx * g;
    }
  }
  return out;
}

// 1D Gaussian taps truncated at radius ceil(4 sigma), renormalized to
// unit sum.
Eigen::VectorXd gaussian_taps(double sigma);

// Separable Gaussian blur with zero padding at the borders.
Grid gaussian_filter(const Grid& image, double sigma);
GridF gaussian_filter(const GridF& image, double sigma);

}  // namespace qsr

#endif
