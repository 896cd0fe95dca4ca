#ifndef QSR_GAUSSFIT_HPP
#define QSR_GAUSSFIT_HPP

#include <optional>

#include "qsr/grid.hpp"

namespace qsr {

struct Roi {
  Eigen::Index row0 = 0, col0 = 0, rows = 0, cols = 0;
};

struct GaussFitResult {
  double x0 = 0, y0 = 0;          // image coordinates (col, row), pixels
  double sigma_x = 1, sigma_y = 1;  // canonicalized so sigma_x >= sigma_y
  double theta = 0;               // radians in [0, pi)
  double amplitude = 0;
  double offset = 0;
  double residual_norm = 0;
  bool converged = false;
  double position_uncertainty = 0;  // pixels, from the fit curvature
};

struct GaussFitInit {
  double x0, y0, sigma_x, sigma_y, theta, amplitude, offset;
};

// Asymmetric rotated 2D Gaussian + offset, fitted by damped least
// squares (Levenberg-Marquardt). Converged when the relative cost
// change drops below 1e-10, capped at 200 iterations.
GaussFitResult fit_gaussian_2d(const Grid& image, const Roi& roi,
                               const std::optional<GaussFitInit>& init = {});

// Model evaluation, exposed for tests and synthetic truth rendering.
Grid render_gaussian_2d(Eigen::Index rows, Eigen::Index cols,
                        const GaussFitInit& p);

}  // namespace qsr

#endif
