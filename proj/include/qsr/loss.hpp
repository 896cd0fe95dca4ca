#ifndef QSR_LOSS_HPP
#define QSR_LOSS_HPP

#include "qsr/grid.hpp"

namespace qsr {

struct LossConfig {
  double epsilon = 1e-5;      // entropic regularization weight
  double filter_sigma = 1.5;  // Gaussian filter sigma, high-res pixels

  void validate() const {
    if (epsilon < 0) throw std::invalid_argument("loss: epsilon must be >= 0");
    if (!(filter_sigma > 0))
      throw std::invalid_argument("loss: filter_sigma must be > 0");
  }
};

template <typename Scalar>
struct LossResultT {
  Scalar loss = 0;
  GridT<Scalar> grad;  // d loss / d pred
};

// Per-sample loss ||G*(I - P)||_2^2 + eps * sum(P log P), with
// 0 log 0 := 0; gradient 2 G*(G*(P - I)) + eps (log P + 1), the log
// clamped where P < 1e-30. Batch averaging is the caller's job.
template <typename Scalar>
LossResultT<Scalar> loss_and_grad(const GridT<Scalar>& pred,
                                  const GridT<Scalar>& target,
                                  const LossConfig& cfg);

}  // namespace qsr

#endif
