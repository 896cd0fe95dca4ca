#include "qsr/gaussfit.hpp"

#include <cmath>
#include <stdexcept>

namespace qsr {
namespace {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

// parameter order: A, x0, y0, sx, sy, theta, offset

double model_at(const Vec7& p, double x, double y) {
  const double dx = x - p[1], dy = y - p[2];
  const double c = std::cos(p[5]), s = std::sin(p[5]);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return p[0] * std::exp(-0.5 * (u * u / (p[3] * p[3]) + v * v / (p[4] * p[4]))) +
         p[6];
}

void jacobian_row(const Vec7& p, double x, double y, Vec7& j, double& m) {
  const double dx = x - p[1], dy = y - p[2];
  const double c = std::cos(p[5]), s = std::sin(p[5]);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  const double isx2 = 1.0 / (p[3] * p[3]), isy2 = 1.0 / (p[4] * p[4]);
  const double E = std::exp(-0.5 * (u * u * isx2 + v * v * isy2));
  const double AE = p[0] * E;
  m = AE + p[6];
  j[0] = E;
  j[1] = AE * (u * c * isx2 - v * s * isy2);
  j[2] = AE * (u * s * isx2 + v * c * isy2);
  j[3] = AE * u * u / (p[3] * p[3] * p[3]);
  j[4] = AE * v * v / (p[4] * p[4] * p[4]);
  j[5] = AE * u * v * (isy2 - isx2);
  j[6] = 1.0;
}

double cost(const Grid& img, const Roi& roi, const Vec7& p) {
  double c = 0;
  for (Eigen::Index i = 0; i < roi.rows; ++i)
    for (Eigen::Index j = 0; j < roi.cols; ++j) {
      const double r = model_at(p, double(roi.col0 + j), double(roi.row0 + i)) -
                       img(roi.row0 + i, roi.col0 + j);
      c += r * r;
    }
  return c;
}

Vec7 initial_guess(const Grid& img, const Roi& roi) {
  double lo = img(roi.row0, roi.col0), hi = lo;
  for (Eigen::Index i = 0; i < roi.rows; ++i)
    for (Eigen::Index j = 0; j < roi.cols; ++j) {
      lo = std::min(lo, img(roi.row0 + i, roi.col0 + j));
      hi = std::max(hi, img(roi.row0 + i, roi.col0 + j));
    }
  if (!(hi > lo)) throw std::invalid_argument("fit_gaussian_2d: constant ROI");

  double mass = 0, mx = 0, my = 0;
  for (Eigen::Index i = 0; i < roi.rows; ++i)
    for (Eigen::Index j = 0; j < roi.cols; ++j) {
      const double w = img(roi.row0 + i, roi.col0 + j) - lo;
      mass += w;
      mx += w * double(roi.col0 + j);
      my += w * double(roi.row0 + i);
    }
  mx /= mass;
  my /= mass;
  double vx = 0, vy = 0;
  for (Eigen::Index i = 0; i < roi.rows; ++i)
    for (Eigen::Index j = 0; j < roi.cols; ++j) {
      const double w = img(roi.row0 + i, roi.col0 + j) - lo;
      vx += w * std::pow(double(roi.col0 + j) - mx, 2);
      vy += w * std::pow(double(roi.row0 + i) - my, 2);
    }
  vx = std::max(vx / mass, 0.25);
  vy = std::max(vy / mass, 0.25);

  Vec7 p;
  p << hi - lo, mx, my, std::sqrt(vx), std::sqrt(vy), 0.0, lo;
  return p;
}

}  // namespace

Grid render_gaussian_2d(Eigen::Index rows, Eigen::Index cols,
                        const GaussFitInit& g) {
  Vec7 p;
  p << g.amplitude, g.x0, g.y0, g.sigma_x, g.sigma_y, g.theta, g.offset;
  Grid out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      out(i, j) = model_at(p, double(j), double(i));
  return out;
}

GaussFitResult fit_gaussian_2d(const Grid& image, const Roi& roi,
                               const std::optional<GaussFitInit>& init) {
  if (roi.row0 < 0 || roi.col0 < 0 || roi.rows < 7 || roi.cols < 7 ||
      roi.row0 + roi.rows > image.rows() || roi.col0 + roi.cols > image.cols())
    throw std::invalid_argument("fit_gaussian_2d: ROI must lie within the image and span at least 7x7 pixels");

  Vec7 p;
  if (init) {
    p << init->amplitude, init->x0, init->y0, init->sigma_x, init->sigma_y,
        init->theta, init->offset;
  } else {
    p = initial_guess(image, roi);
  }

  const double initial_cost = cost(image, roi, p);
  double current = initial_cost;
  double lambda = 1e-3;
  bool converged = false;

  const Eigen::Index n = roi.rows * roi.cols;
  Eigen::MatrixXd J(n, 7);
  Eigen::VectorXd r(n);

  for (int it = 0; it < 200; ++it) {
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < roi.rows; ++i)
      for (Eigen::Index j = 0; j < roi.cols; ++j, ++row) {
        Vec7 jr;
        double m;
        jacobian_row(p, double(roi.col0 + j), double(roi.row0 + i), jr, m);
        J.row(row) = jr;
        r[row] = m - image(roi.row0 + i, roi.col0 + j);
      }
    const Mat7 jtj = J.transpose() * J;
    const Vec7 jtr = J.transpose() * r;

    bool stepped = false;
    for (int tries = 0; tries < 12; ++tries) {
      Mat7 damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal();
      const Vec7 step = damped.ldlt().solve(jtr);
      Vec7 cand = p - step;
      cand[3] = std::abs(cand[3]);
      cand[4] = std::abs(cand[4]);
      if (cand[3] < 1e-3) cand[3] = 1e-3;
      if (cand[4] < 1e-3) cand[4] = 1e-3;
      const double c = cost(image, roi, cand);
      if (c < current) {
        const double rel = (current - c) / std::max(current, 1e-300);
        p = cand;
        current = c;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (rel < 1e-10) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) {
      converged = current < initial_cost || current == 0.0;
      break;
    }
    if (converged) break;
  }

  GaussFitResult res;
  res.amplitude = p[0];
  res.x0 = p[1];
  res.y0 = p[2];
  res.sigma_x = p[3];
  res.sigma_y = p[4];
  res.theta = p[5];
  res.offset = p[6];
  res.residual_norm = std::sqrt(current);
  res.converged = converged && current <= initial_cost;

  // canonical orientation: sigma_x >= sigma_y, theta in [0, pi)
  if (res.sigma_x < res.sigma_y) {
    std::swap(res.sigma_x, res.sigma_y);
    res.theta += M_PI / 2;
  }
  res.theta = std::fmod(res.theta, M_PI);
  if (res.theta < 0) res.theta += M_PI;

  // curvature-based position uncertainty
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < roi.rows; ++i)
    for (Eigen::Index j = 0; j < roi.cols; ++j, ++row) {
      Vec7 jr;
      double m;
      jacobian_row(p, double(roi.col0 + j), double(roi.row0 + i), jr, m);
      J.row(row) = jr;
    }
  const Mat7 jtj = J.transpose() * J;
  const double dof = double(n - 7);
  if (dof > 0) {
    const double var = current / dof;
    const Mat7 cov = var * jtj.ldlt().solve(Mat7::Identity());
    const double c2 = cov(1, 1) + cov(2, 2);
    res.position_uncertainty = c2 > 0 ? std::sqrt(c2) : 0.0;
  }
  return res;
}

}  // namespace qsr
