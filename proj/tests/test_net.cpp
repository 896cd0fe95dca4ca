#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "qsr/loss.hpp"
#include "qsr/net.hpp"

using qsr::Grid;
using qsr::NetConfig;

namespace {

NetConfig tiny_config() {
  NetConfig cfg;
  cfg.depth = 3;
  cfg.filters = 2;
  cfg.kernel = 3;
  cfg.dropout_rate = 0.0;
  cfg.upsample_after = {1, 2};
  return cfg;
}

Grid random_input(qsr::RngState& rng, Eigen::Index h, Eigen::Index w) {
  Grid g(h, w);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.uniform(0, 10);
  return g;
}

}  // namespace

TEST_CASE("count_params reproduces the full-size total") {
  CHECK(qsr::count_params(NetConfig{}) == 1503751);
}

TEST_CASE("count_params on the smallest net") {
  NetConfig cfg;
  cfg.depth = 1;
  cfg.filters = 1;
  cfg.kernel = 1;
  cfg.upsample_after = {};
  CHECK(qsr::count_params(cfg) == 4);  // (1+1) hidden + (1+1) output
}

TEST_CASE("doubling the filters roughly quadruples the count") {
  NetConfig wide;
  wide.filters = 100;
  const double ratio =
      double(qsr::count_params(wide)) / double(qsr::count_params(NetConfig{}));
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("config validation rejects malformed nets") {
  NetConfig cfg = tiny_config();
  cfg.kernel = 4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.upsample_after = {2, 1};  // not increasing
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.upsample_after = {3};  // must be < depth
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("init_params is deterministic and zero-biased") {
  const NetConfig cfg = tiny_config();
  auto r1 = qsr::RngState::seeded(50);
  auto r2 = qsr::RngState::seeded(50);
  const auto a = qsr::init_params<double>(r1, cfg);
  const auto b = qsr::init_params<double>(r2, cfg);
  CHECK(a.flat == b.flat);
  CHECK(a.flat.size() == qsr::count_params(cfg));

  // biases are the trailing `filters` entries of each hidden layer block
  const Eigen::Index w1 = cfg.kernel * cfg.kernel * cfg.filters;
  for (Eigen::Index i = 0; i < cfg.filters; ++i) CHECK(a.flat[w1 + i] == 0.0);
}

TEST_CASE("init variance follows the He fan-in rule") {
  NetConfig cfg;
  cfg.depth = 4;
  cfg.filters = 50;
  cfg.kernel = 5;
  cfg.upsample_after = {};
  auto rng = qsr::RngState::seeded(51);
  const auto p = qsr::init_params<double>(rng, cfg);
  // second hidden layer: fan_in = 25 * 50, plenty of samples
  const Eigen::Index l1 = 25 * 50 + 50;  // first layer block
  const Eigen::Index n = 25 * 50 * 50;
  double s = 0, s2 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = p.flat[l1 + i];
    s += w;
    s2 += w * w;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  const double expect = 2.0 / ((1.0 + 0.05 * 0.05) * 25.0 * 50.0);
  CHECK(std::abs(mean) < 3.0 * std::sqrt(expect / n));
  CHECK(var == doctest::Approx(expect).epsilon(0.15));
}

TEST_CASE("forward shape law: 4x with two upsamplings") {
  const NetConfig cfg = tiny_config();
  auto rng = qsr::RngState::seeded(52);
  const auto p = qsr::init_params<double>(rng, cfg);
  const Grid a = qsr::forward_eval(p, cfg, random_input(rng, 12, 12));
  CHECK(a.rows() == 48);
  CHECK(a.cols() == 48);
  const Grid b = qsr::forward_eval(p, cfg, random_input(rng, 6, 9));
  CHECK(b.rows() == 24);
  CHECK(b.cols() == 36);
}

TEST_CASE("softmax contract: unit mass, non-negative, deterministic") {
  const NetConfig cfg = tiny_config();
  auto rng = qsr::RngState::seeded(53);
  for (int t = 0; t < 20; ++t) {
    auto init_rng = rng.child(t);
    const auto p = qsr::init_params<double>(init_rng, cfg);
    const Grid in = random_input(rng, 10, 10);
    const Grid out = qsr::forward_eval(p, cfg, in);
    CHECK(out.sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(out.minCoeff() >= 0.0);
    const Grid again = qsr::forward_eval(p, cfg, in);
    CHECK((out == again).all());
  }
}

TEST_CASE("zero parameters give a uniform output") {
  const NetConfig cfg = tiny_config();
  qsr::NetParams p;
  p.flat = Eigen::VectorXd::Zero(qsr::count_params(cfg));
  auto rng = qsr::RngState::seeded(54);
  const Grid out = qsr::forward_eval(p, cfg, random_input(rng, 8, 8));
  CHECK((out - 1.0 / double(out.size())).abs().maxCoeff() < 1e-12);
}

TEST_CASE("softmax_global closed forms") {
  Grid flat = Grid::Constant(200, 200, 3.7);
  const Grid u = qsr::softmax_global(flat);
  CHECK((u - 2.5e-5).abs().maxCoeff() < 1e-18);

  Grid spiked = Grid::Zero(50, 50);
  spiked(7, 9) = 20.0;
  const Grid s = qsr::softmax_global(spiked);
  CHECK(s(7, 9) > 0.999);

  // shift invariance
  Grid logits(4, 4);
  logits << 1, 2, 3, 4, -1, 0, 1, 2, 5, 4, 3, 2, 0, 0, 1, 1;
  const Grid p1 = qsr::softmax_global(logits);
  const Grid p2 = qsr::softmax_global(Grid(logits + 123.25));
  CHECK((p1 - p2).abs().maxCoeff() < 1e-12);

  Grid bad(2, 2);
  bad << 1, 2, std::nan(""), 4;
  CHECK_THROWS_AS(qsr::softmax_global(bad), std::invalid_argument);
}

TEST_CASE("gradients match central finite differences on a tiny net") {
  NetConfig cfg = tiny_config();
  cfg.upsample_after = {1};
  qsr::LossConfig loss_cfg;
  loss_cfg.filter_sigma = 1.0;
  auto rng = qsr::RngState::seeded(55);
  auto params = qsr::init_params<double>(rng, cfg);
  const Grid input = random_input(rng, 8, 8);
  Grid target = Grid::Zero(16, 16);
  target(4, 4) = 0.5;
  target(12, 10) = 0.5;

  qsr::ForwardCacheT<double> cache;
  auto drop_rng = rng.child(1);
  const Grid pred = qsr::forward_train(params, cfg, input, drop_rng, cache);
  const auto lg = qsr::loss_and_grad(pred, target, loss_cfg);
  const auto bw = qsr::backward(params, cfg, cache, lg.grad);

  auto loss_of = [&](const qsr::NetParams& p) {
    return double(
        qsr::loss_and_grad(qsr::forward_eval(p, cfg, input), target, loss_cfg)
            .loss);
  };
  const double h = 1e-6;
  double worst = 0;
  for (Eigen::Index i = 0; i < params.flat.size(); ++i) {
    qsr::NetParams p = params;
    p.flat[i] += h;
    const double up = loss_of(p);
    p.flat[i] -= 2 * h;
    const double dn = loss_of(p);
    const double fd = (up - dn) / (2 * h);
    const double an = bw.param_grads[i];
    // absolute floor 1e-6: the output bias has an exactly-zero true
    // gradient (softmax shift invariance), leaving only FD roundoff
    worst = std::max(worst, std::abs(fd - an) /
                                std::max({std::abs(fd), std::abs(an), 1e-6}));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("zero output gradient backpropagates to zero parameter grads") {
  const NetConfig cfg = tiny_config();
  auto rng = qsr::RngState::seeded(56);
  const auto params = qsr::init_params<double>(rng, cfg);
  qsr::ForwardCacheT<double> cache;
  auto drop_rng = rng.child(1);
  qsr::forward_train(params, cfg, random_input(rng, 8, 8), drop_rng, cache);
  const auto bw = qsr::backward(params, cfg, cache, Grid(Grid::Zero(32, 32)));
  CHECK(bw.param_grads.cwiseAbs().maxCoeff() == 0.0);
  CHECK(bw.input_grad.abs().maxCoeff() == 0.0);
}

TEST_CASE("train-mode forward is deterministic given the dropout seed") {
  NetConfig cfg = tiny_config();
  cfg.dropout_rate = 0.2;
  auto rng = qsr::RngState::seeded(57);
  const auto params = qsr::init_params<double>(rng, cfg);
  const Grid input = random_input(rng, 8, 8);

  qsr::ForwardCacheT<double> c1, c2;
  auto r1 = qsr::RngState::seeded(99);
  auto r2 = qsr::RngState::seeded(99);
  const Grid a = qsr::forward_train(params, cfg, input, r1, c1);
  const Grid b = qsr::forward_train(params, cfg, input, r2, c2);
  CHECK((a == b).all());

  // and backward through the cached masks is also deterministic
  Grid g = Grid::Constant(32, 32, 1.0 / (32.0 * 32.0));
  const auto bw1 = qsr::backward(params, cfg, c1, g);
  const auto bw2 = qsr::backward(params, cfg, c2, g);
  CHECK(bw1.param_grads == bw2.param_grads);
}

TEST_CASE("weights survive a save/load round trip") {
  const NetConfig cfg = tiny_config();
  auto rng = qsr::RngState::seeded(58);
  const auto params = qsr::init_params<double>(rng, cfg);
  const std::string path = "/tmp/qsr_test_weights.qsrw";
  qsr::save_weights(path, params, cfg);

  NetConfig loaded_cfg;
  const auto loaded = qsr::load_weights<double>(path, loaded_cfg);
  CHECK(loaded_cfg.depth == cfg.depth);
  CHECK(loaded_cfg.filters == cfg.filters);
  CHECK(loaded.flat == params.flat);

  const Grid in = random_input(rng, 9, 9);
  CHECK((qsr::forward_eval(params, cfg, in) ==
         qsr::forward_eval(loaded, loaded_cfg, in))
            .all());
  std::remove(path.c_str());
}

TEST_CASE("weight file requires the QSRW magic") {
  const std::string path = "/tmp/qsr_test_badweights.qsrw";
  std::FILE* f = std::fopen(path.c_str(), "wb");
  std::fputs("QSRT not a weight file at all, padded out a bit", f);
  std::fclose(f);
  NetConfig cfg;
  CHECK_THROWS_WITH_AS(qsr::load_weights<double>(path, cfg),
                       doctest::Contains("magic"), std::runtime_error);
  std::remove(path.c_str());
}
