#ifndef QSR_CONVOLUTION_HPP
#define QSR_CONVOLUTION_HPP

#include "qsr/grid.hpp"

namespace qsr {

// "Same" convolution with zero padding outside the image. Kernel must
// have odd extents.
Grid convolve_direct(const Grid& image, const Grid& kernel);

// FFT-based path, elementwise equal to convolve_direct up to roundoff.
Grid convolve_fft(const Grid& image, const Grid& kernel);

}  // namespace qsr

#endif
