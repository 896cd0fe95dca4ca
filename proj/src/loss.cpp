#include "qsr/loss.hpp"

#include <cmath>

#include "qsr/resample.hpp"

namespace qsr {

template <typename Scalar>
LossResultT<Scalar> loss_and_grad(const GridT<Scalar>& pred,
                                  const GridT<Scalar>& target,
                                  const LossConfig& cfg) {
  cfg.validate();
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("loss: pred/target shape mismatch");
  if ((pred < Scalar(-1e-12)).any())
    throw std::invalid_argument("loss: prediction has negative pixels");

  const GridT<Scalar> diff_f =
      gaussian_filter(GridT<Scalar>(pred - target), cfg.filter_sigma);

  LossResultT<Scalar> res;
  res.loss = (diff_f * diff_f).sum();
  // the filter kernel is symmetric, so the adjoint is the filter itself
  res.grad = Scalar(2) * gaussian_filter(diff_f, cfg.filter_sigma);

  if (cfg.epsilon > 0) {
    const Scalar eps = static_cast<Scalar>(cfg.epsilon);
    const Scalar floor = Scalar(1e-30);
    Scalar entropy = 0;
    GridT<Scalar> egrad(pred.rows(), pred.cols());
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      const Scalar p = pred.data()[i];
      const Scalar lg = std::log(std::max(p, floor));
      entropy += p > Scalar(0) ? p * lg : Scalar(0);
      egrad.data()[i] = lg + Scalar(1);
    }
    res.loss += eps * entropy;
    res.grad += eps * egrad;
  }
  return res;
}

template LossResultT<double> loss_and_grad<double>(const GridT<double>&,
                                                   const GridT<double>&,
                                                   const LossConfig&);
template LossResultT<float> loss_and_grad<float>(const GridT<float>&,
                                                 const GridT<float>&,
                                                 const LossConfig&);

}  // namespace qsr
