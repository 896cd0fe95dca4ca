#ifndef QSR_TRAIN_HPP
#define QSR_TRAIN_HPP

#include <string>
#include <vector>

#include "qsr/adam.hpp"
#include "qsr/dataset.hpp"
#include "qsr/loss.hpp"
#include "qsr/net.hpp"

namespace qsr {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  int epochs_per_iteration = 50;
  int iterations = 130;
  int samples_per_iteration = 5000;
  double validation_fraction = 0.25;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainLog {
  struct Row {
    int iteration = 0;
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double seconds = 0;
  };
  std::vector<Row> rows;

  void write_csv(const std::string& path) const;
};

template <typename Scalar>
struct TrainResultT {
  NetParamsT<Scalar> best;    // lowest validation loss seen
  NetParamsT<Scalar> final;   // parameters after the last step
  double best_val = 0;
  TrainLog log;
};

// Mean eval-mode loss over the pairs; no dropout, nothing mutated.
template <typename Scalar>
double validate(const NetParamsT<Scalar>& params, const NetConfig& net_cfg,
                const std::vector<SamplePair>& pairs,
                const std::vector<std::uint64_t>& indices,
                const LossConfig& loss_cfg);

// Incremental learning: every iteration draws a fresh sample set from
// per-iteration child seeds, so the whole run is a pure function of
// the configs. When `checkpoint_dir` is set, per-iteration checkpoints
// and a resume state are written there and an interrupted run picks up
// at the last completed iteration.
template <typename Scalar>
TrainResultT<Scalar> train_incremental(const TrainConfig& cfg,
                                       const SceneConfig& scene,
                                       const NetConfig& net_cfg,
                                       const LossConfig& loss_cfg,
                                       const std::string& checkpoint_dir = "");

}  // namespace qsr

#endif
