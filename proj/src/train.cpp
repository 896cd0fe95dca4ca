#include "qsr/train.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace qsr {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("train: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (epochs_per_iteration < 1 || iterations < 1 || samples_per_iteration < 1)
    throw std::invalid_argument("train: counts must be positive");
  if (!(validation_fraction > 0 && validation_fraction < 1))
    throw std::invalid_argument("train: validation_fraction must be in (0, 1)");
}

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "iteration,epoch,train_loss,val_loss,seconds\n";
  os.precision(12);
  for (const Row& r : rows)
    os << r.iteration << ',' << r.epoch << ',' << r.train_loss << ','
       << r.val_loss << ',' << r.seconds << '\n';
}

namespace {

template <typename Scalar>
GridT<Scalar> to_scalar(const Grid& g) {
  return g.template cast<Scalar>();
}

// Resume state: params, adam moments, best params, progress counters.
template <typename Scalar>
struct TrainerState {
  NetParamsT<Scalar> params;
  AdamStateT<Scalar> adam;
  NetParamsT<Scalar> best;
  double best_val = std::numeric_limits<double>::infinity();
  int iterations_done = 0;
  TrainLog log;
};

constexpr char kStateMagic[4] = {'Q', 'S', 'R', 'S'};

template <typename Scalar>
void write_vec(std::ostream& os, const Eigen::Vector<Scalar, Eigen::Dynamic>& v) {
  Eigen::VectorXd d = v.template cast<double>();
  const std::uint64_t n = std::uint64_t(d.size());
  os.write(reinterpret_cast<const char*>(&n), 8);
  os.write(reinterpret_cast<const char*>(d.data()),
           static_cast<std::streamsize>(8 * n));
}

template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> read_vec(std::istream& is) {
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), 8);
  Eigen::VectorXd d(n);
  is.read(reinterpret_cast<char*>(d.data()),
          static_cast<std::streamsize>(8 * n));
  if (!is) throw std::runtime_error("train state: truncated vector");
  return d.cast<Scalar>();
}

template <typename Scalar>
void save_state(const std::string& path, const TrainerState<Scalar>& st) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kStateMagic, 4);
  os.put(0x01);
  json hdr{{"iterations_done", st.iterations_done},
           {"adam_t", st.adam.t},
           {"best_val", st.best_val},
           {"log_rows", st.log.rows.size()}};
  const std::string h = hdr.dump();
  const auto len = static_cast<std::uint32_t>(h.size());
  os.write(reinterpret_cast<const char*>(&len), 4);
  os.write(h.data(), len);
  write_vec(os, st.params.flat);
  write_vec(os, st.adam.m);
  write_vec(os, st.adam.v);
  write_vec(os, st.best.flat);
  for (const auto& r : st.log.rows) {
    os.write(reinterpret_cast<const char*>(&r.iteration), sizeof r.iteration);
    os.write(reinterpret_cast<const char*>(&r.epoch), sizeof r.epoch);
    os.write(reinterpret_cast<const char*>(&r.train_loss), sizeof r.train_loss);
    os.write(reinterpret_cast<const char*>(&r.val_loss), sizeof r.val_loss);
    os.write(reinterpret_cast<const char*>(&r.seconds), sizeof r.seconds);
  }
  if (!os) throw std::runtime_error("train state: write failed");
}

template <typename Scalar>
bool load_state(const std::string& path, TrainerState<Scalar>& st) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kStateMagic, 4) != 0)
    throw std::runtime_error("train state: bad magic in " + path);
  if (is.get() != 0x01) throw std::runtime_error("train state: bad version");
  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 4);
  std::string h(len, '\0');
  is.read(h.data(), len);
  const json hdr = json::parse(h);
  st.iterations_done = hdr.at("iterations_done").get<int>();
  st.adam.t = hdr.at("adam_t").get<std::int64_t>();
  st.best_val = hdr.at("best_val").get<double>();
  const auto n_rows = hdr.at("log_rows").get<std::uint64_t>();
  st.params.flat = read_vec<Scalar>(is);
  st.adam.m = read_vec<Scalar>(is);
  st.adam.v = read_vec<Scalar>(is);
  st.best.flat = read_vec<Scalar>(is);
  st.log.rows.resize(n_rows);
  for (auto& r : st.log.rows) {
    is.read(reinterpret_cast<char*>(&r.iteration), sizeof r.iteration);
    is.read(reinterpret_cast<char*>(&r.epoch), sizeof r.epoch);
    is.read(reinterpret_cast<char*>(&r.train_loss), sizeof r.train_loss);
    is.read(reinterpret_cast<char*>(&r.val_loss), sizeof r.val_loss);
    is.read(reinterpret_cast<char*>(&r.seconds), sizeof r.seconds);
  }
  if (!is) throw std::runtime_error("train state: truncated " + path);
  return true;
}

}  // namespace

template <typename Scalar>
double validate(const NetParamsT<Scalar>& params, const NetConfig& net_cfg,
                const std::vector<SamplePair>& pairs,
                const std::vector<std::uint64_t>& indices,
                const LossConfig& loss_cfg) {
  if (indices.empty()) throw std::invalid_argument("validate: empty pair set");
  double total = 0;
  for (std::uint64_t idx : indices) {
    const SamplePair& p = pairs[idx];
    GridT<Scalar> pred =
        forward_eval(params, net_cfg, to_scalar<Scalar>(p.input));
    auto lr = loss_and_grad(pred, to_scalar<Scalar>(p.target), loss_cfg);
    total += double(lr.loss);
  }
  return total / double(indices.size());
}

template <typename Scalar>
TrainResultT<Scalar> train_incremental(const TrainConfig& cfg,
                                       const SceneConfig& scene,
                                       const NetConfig& net_cfg,
                                       const LossConfig& loss_cfg,
                                       const std::string& checkpoint_dir) {
  cfg.validate();
  scene.validate();
  net_cfg.validate();
  loss_cfg.validate();

  const RngState root = RngState::seeded(cfg.seed);
  const std::string state_path =
      checkpoint_dir.empty() ? "" : checkpoint_dir + "/train_state.qsrs";

  TrainerState<Scalar> st;
  bool resumed = false;
  if (!state_path.empty()) resumed = load_state(state_path, st);
  if (!resumed) {
    RngState init_rng = root.child(0);
    st.params = init_params<Scalar>(init_rng, net_cfg);
    st.adam = AdamStateT<Scalar>::zero(st.params.flat.size());
    st.best = st.params;
  }

  AdamConfig adam_cfg{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                      cfg.adam_eps};

  for (int k = st.iterations_done; k < cfg.iterations; ++k) {
    const RngState iter_rng = root.child(std::uint64_t(k) + 1);
    const std::vector<SamplePair> pairs = generate_pairs(
        iter_rng.child(0), scene, std::uint64_t(cfg.samples_per_iteration));
    const SplitIndices split = split_validation(
        pairs.size(), cfg.validation_fraction, iter_rng.child(1).key);

    for (int e = 0; e < cfg.epochs_per_iteration; ++e) {
      const auto t0 = std::chrono::steady_clock::now();
      RngState ep_rng = iter_rng.child(2 + std::uint64_t(e));

      // Fisher-Yates shuffle of the training order
      std::vector<std::uint64_t> order = split.train;
      for (std::uint64_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[ep_rng.uniform_int(i)]);

      double epoch_loss = 0;
      std::uint64_t n_batches = 0;
      for (std::uint64_t b0 = 0; b0 < order.size();
           b0 += std::uint64_t(cfg.batch_size)) {
        const std::uint64_t b1 =
            std::min(order.size(), b0 + std::uint64_t(cfg.batch_size));
        const Scalar inv_n = Scalar(1) / Scalar(b1 - b0);

        Eigen::Vector<Scalar, Eigen::Dynamic> grad_sum =
            Eigen::Vector<Scalar, Eigen::Dynamic>::Zero(st.params.flat.size());
        double batch_loss = 0;
        for (std::uint64_t s = b0; s < b1; ++s) {
          const SamplePair& p = pairs[order[s]];
          RngState drop_rng = ep_rng.child(1000 + s);
          ForwardCacheT<Scalar> cache;
          GridT<Scalar> pred = forward_train(
              st.params, net_cfg, to_scalar<Scalar>(p.input), drop_rng, cache);
          auto lr = loss_and_grad(pred, to_scalar<Scalar>(p.target), loss_cfg);
          batch_loss += double(lr.loss);
          GridT<Scalar> scaled = inv_n * lr.grad;
          auto bw = backward(st.params, net_cfg, cache, scaled);
          grad_sum += bw.param_grads;
        }
        batch_loss /= double(b1 - b0);
        if (!std::isfinite(batch_loss))
          throw std::runtime_error(
              "train: non-finite loss at iteration " + std::to_string(k) +
              ", epoch " + std::to_string(e) + ", batch " +
              std::to_string(n_batches) + " (first sample index " +
              std::to_string(order[b0]) + ")");
        adam_step(st.params.flat, grad_sum, st.adam, adam_cfg);
        epoch_loss += batch_loss;
        ++n_batches;
      }

      const double val_loss =
          validate(st.params, net_cfg, pairs, split.val, loss_cfg);
      if (val_loss < st.best_val) {
        st.best_val = val_loss;
        st.best = st.params;
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      st.log.rows.push_back(
          {k, e, epoch_loss / double(std::max<std::uint64_t>(1, n_batches)),
           val_loss, secs});
    }

    st.iterations_done = k + 1;
    if (!checkpoint_dir.empty()) {
      save_weights(checkpoint_dir + "/ckpt_iter_" + std::to_string(k) + ".qsrw",
                   st.params, net_cfg);
      save_state(state_path, st);
    }
  }

  TrainResultT<Scalar> res;
  res.best = std::move(st.best);
  res.final = std::move(st.params);
  res.best_val = st.best_val;
  res.log = std::move(st.log);
  return res;
}

template double validate<double>(const NetParamsT<double>&, const NetConfig&,
                                 const std::vector<SamplePair>&,
                                 const std::vector<std::uint64_t>&,
                                 const LossConfig&);
template double validate<float>(const NetParamsT<float>&, const NetConfig&,
                                const std::vector<SamplePair>&,
                                const std::vector<std::uint64_t>&,
                                const LossConfig&);
template TrainResultT<double> train_incremental<double>(
    const TrainConfig&, const SceneConfig&, const NetConfig&, const LossConfig&,
    const std::string&);
template TrainResultT<float> train_incremental<float>(
    const TrainConfig&, const SceneConfig&, const NetConfig&, const LossConfig&,
    const std::string&);

}  // namespace qsr
