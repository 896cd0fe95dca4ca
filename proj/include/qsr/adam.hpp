#ifndef QSR_ADAM_HPP
#define QSR_ADAM_HPP

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace qsr {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamStateT {
  Eigen::Vector<Scalar, Eigen::Dynamic> m;  // first moment
  Eigen::Vector<Scalar, Eigen::Dynamic> v;  // second moment
  std::int64_t t = 0;

  static AdamStateT zero(Eigen::Index n) {
    AdamStateT s;
    s.m = Eigen::Vector<Scalar, Eigen::Dynamic>::Zero(n);
    s.v = Eigen::Vector<Scalar, Eigen::Dynamic>::Zero(n);
    return s;
  }
};

// Standard bias-corrected Adam update, in place.
template <typename Scalar>
void adam_step(Eigen::Vector<Scalar, Eigen::Dynamic>& params,
               const Eigen::Vector<Scalar, Eigen::Dynamic>& grads,
               AdamStateT<Scalar>& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  ++state.t;
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * grads;
  state.v.array() =
      b2 * state.v.array() + (Scalar(1) - b2) * grads.array().square();
  const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta1, double(state.t)));
  const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta2, double(state.t)));
  const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
  const Scalar eps = static_cast<Scalar>(cfg.eps);
  params.array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

}  // namespace qsr

#endif
