#ifndef QSR_NET_HPP
#define QSR_NET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "qsr/grid.hpp"
#include "qsr/rng.hpp"

namespace qsr {

struct NetConfig {
  int depth = 25;    // hidden conv layers; one more 1-channel output conv follows
  int filters = 50;
  int kernel = 5;
  double leaky_slope = 0.05;
  double dropout_rate = 0.01;
  std::vector<int> upsample_after = {5, 10};  // 1-based hidden layer indices

  void validate() const;
  int upsample_count() const { return static_cast<int>(upsample_after.size()); }
};

std::int64_t count_params(const NetConfig& config);

// All trainable weights and biases as one flat vector. Layer l of
// depth+1 conv layers occupies [offset_l, offset_l + Cout*Cin*k*k) as a
// row-major (Cout, Cin*k*k) weight block (inner order cin, ky, kx,
// i.e. out x in x k x k) followed by Cout biases.
template <typename Scalar>
struct NetParamsT {
  Eigen::Vector<Scalar, Eigen::Dynamic> flat;
};

using NetParams = NetParamsT<double>;
using NetParamsF = NetParamsT<float>;

// He fan-in initialization adjusted for the leaky slope; biases zero.
template <typename Scalar>
NetParamsT<Scalar> init_params(RngState& rng, const NetConfig& config);

// Per-layer state kept by a train-mode forward for the backward pass.
template <typename Scalar>
struct ForwardCacheT {
  using FeatureMap = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>;
  struct Layer {
    FeatureMap cols;         // im2col patch matrix (Cin*k*k, H*W) of the input
    Eigen::Index in_h = 0, in_w = 0;
    FeatureMap pre_act;      // (Cout, H*W) before the activation
    FeatureMap drop_mask;    // inverted-dropout scale per activation; empty if off
    bool upsampled = false;  // x2 resize applied after this layer
  };
  std::vector<Layer> layers;
  GridT<Scalar> output;      // softmax output, kept for the softmax Jacobian
};

// Eval-mode forward: deterministic, dropout off.
template <typename Scalar>
GridT<Scalar> forward_eval(const NetParamsT<Scalar>& params,
                           const NetConfig& config, const GridT<Scalar>& input);

// Train-mode forward: dropout masks drawn from `rng`, cache filled.
template <typename Scalar>
GridT<Scalar> forward_train(const NetParamsT<Scalar>& params,
                            const NetConfig& config, const GridT<Scalar>& input,
                            RngState& rng, ForwardCacheT<Scalar>& cache);

template <typename Scalar>
struct BackwardResultT {
  Eigen::Vector<Scalar, Eigen::Dynamic> param_grads;
  GridT<Scalar> input_grad;
};

// Exact reverse-mode gradients through softmax, convs, activations,
// dropout masks and the bilinear resize adjoint. `output_grad` is the
// loss gradient with respect to the softmax output.
template <typename Scalar>
BackwardResultT<Scalar> backward(const NetParamsT<Scalar>& params,
                                 const NetConfig& config,
                                 const ForwardCacheT<Scalar>& cache,
                                 const GridT<Scalar>& output_grad);

// Numerically stable softmax over the whole raster.
template <typename Scalar>
GridT<Scalar> softmax_global(const GridT<Scalar>& logits);

// Weight file ".qsrw": magic "QSRW", version 0x01, u32 LE JSON config
// length, config JSON, then per-layer f64 tensors (weights rank 4,
// biases rank 1) in qsrt framing.
template <typename Scalar>
void save_weights(const std::string& path, const NetParamsT<Scalar>& params,
                  const NetConfig& config);

template <typename Scalar>
NetParamsT<Scalar> load_weights(const std::string& path, NetConfig& config);

}  // namespace qsr

#endif
