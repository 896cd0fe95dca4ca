#ifndef QSR_GRID_HPP
#define QSR_GRID_HPP

#include <Eigen/Dense>
#include <stdexcept>

namespace qsr {

// Dense 2D raster, row-major to match the on-disk tensor layout.
template <typename Scalar>
using GridT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Grid = GridT<double>;
using GridF = GridT<float>;

template <typename Scalar>
bool all_finite(const GridT<Scalar>& g) {
  return g.isFinite().all();
}

// A kernel is a grid with odd extents, non-negative entries and unit flux.
template <typename Scalar>
void validate_kernel(const GridT<Scalar>& k, Scalar sum_tol = Scalar(1e-9)) {
  if (k.rows() % 2 == 0 || k.cols() % 2 == 0)
    throw std::invalid_argument("kernel extents must be odd");
  if ((k < Scalar(0)).any())
    throw std::invalid_argument("kernel entries must be non-negative");
  if (std::abs(k.sum() - Scalar(1)) > sum_tol)
    throw std::invalid_argument("kernel must sum to 1");
}

}  // namespace qsr

#endif
