#include "qsr/convolution.hpp"

#include <fftw3.h>

#include <complex>
#include <vector>

namespace qsr {
namespace {

void check_kernel_shape(const Grid& kernel) {
  if (kernel.rows() % 2 == 0 || kernel.cols() % 2 == 0)
    throw std::invalid_argument("convolve: kernel extents must be odd");
}

}  // namespace

Grid convolve_direct(const Grid& image, const Grid& kernel) {
  check_kernel_shape(kernel);
  const Eigen::Index h = image.rows(), w = image.cols();
  const Eigen::Index kh = kernel.rows(), kw = kernel.cols();
  const Eigen::Index ch = (kh - 1) / 2, cw = (kw - 1) / 2;
  Grid out = Grid::Zero(h, w);
  for (Eigen::Index u = 0; u < kh; ++u) {
    for (Eigen::Index v = 0; v < kw; ++v) {
      const double kv = kernel(u, v);
      if (kv == 0.0) continue;
      // out(i,j) += k(u,v) * img(i - (u-ch), j - (v-cw)) over the overlap
      const Eigen::Index di = u - ch, dj = v - cw;
      const Eigen::Index i0 = std::max<Eigen::Index>(0, di);
      const Eigen::Index i1 = std::min(h, h + di);
      const Eigen::Index j0 = std::max<Eigen::Index>(0, dj);
      const Eigen::Index j1 = std::min(w, w + dj);
      if (i0 >= i1 || j0 >= j1) continue;
      out.block(i0, j0, i1 - i0, j1 - j0) +=
          kv * image.block(i0 - di, j0 - dj, i1 - i0, j1 - j0);
    }
  }
  return out;
}

Grid convolve_fft(const Grid& image, const Grid& kernel) {
  check_kernel_shape(kernel);
  const Eigen::Index h = image.rows(), w = image.cols();
  const Eigen::Index kh = kernel.rows(), kw = kernel.cols();
  const Eigen::Index ph = h + kh - 1, pw = w + kw - 1;
  const Eigen::Index pwc = pw / 2 + 1;

  std::vector<double> a(static_cast<size_t>(ph * pw), 0.0);
  std::vector<double> b(static_cast<size_t>(ph * pw), 0.0);
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < w; ++j) a[i * pw + j] = image(i, j);
  for (Eigen::Index i = 0; i < kh; ++i)
    for (Eigen::Index j = 0; j < kw; ++j) b[i * pw + j] = kernel(i, j);

  std::vector<std::complex<double>> fa(static_cast<size_t>(ph * pwc));
  std::vector<std::complex<double>> fb(static_cast<size_t>(ph * pwc));

  fftw_plan pa = fftw_plan_dft_r2c_2d(
      static_cast<int>(ph), static_cast<int>(pw), a.data(),
      reinterpret_cast<fftw_complex*>(fa.data()), FFTW_ESTIMATE);
  fftw_plan pb = fftw_plan_dft_r2c_2d(
      static_cast<int>(ph), static_cast<int>(pw), b.data(),
      reinterpret_cast<fftw_complex*>(fb.data()), FFTW_ESTIMATE);
  fftw_execute(pa);
  fftw_execute(pb);
  fftw_destroy_plan(pa);
  fftw_destroy_plan(pb);

  const double scale = 1.0 / static_cast<double>(ph * pw);
  for (size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i] * scale;

  fftw_plan pi = fftw_plan_dft_c2r_2d(
      static_cast<int>(ph), static_cast<int>(pw),
      reinterpret_cast<fftw_complex*>(fa.data()), a.data(), FFTW_ESTIMATE);
  fftw_execute(pi);
  fftw_destroy_plan(pi);

  const Eigen::Index ch = (kh - 1) / 2, cw = (kw - 1) / 2;
  Grid out(h, w);
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < w; ++j) out(i, j) = a[(i + ch) * pw + (j + cw)];
  return out;
}

}  // namespace qsr
