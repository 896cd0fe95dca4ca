#include "qsr/net.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "qsr/resample.hpp"

namespace qsr {

using nlohmann::json;

void NetConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("net: depth must be >= 1");
  if (filters < 1) throw std::invalid_argument("net: filters must be >= 1");
  if (kernel < 1 || kernel % 2 == 0)
    throw std::invalid_argument("net: kernel must be odd and positive");
  if (!(dropout_rate >= 0 && dropout_rate < 1))
    throw std::invalid_argument("net: dropout_rate must be in [0, 1)");
  int prev = 0;
  for (int u : upsample_after) {
    if (u <= prev || u >= depth)
      throw std::invalid_argument(
          "net: upsample_after must be strictly increasing, within [1, depth)");
    prev = u;
  }
}

namespace {

struct Layout {
  struct Layer {
    Eigen::Index w_offset, b_offset;
    Eigen::Index cin, cout, kk;  // kk = kernel * kernel
  };
  std::vector<Layer> layers;
  Eigen::Index total = 0;
};

Layout make_layout(const NetConfig& cfg) {
  cfg.validate();
  Layout lay;
  const Eigen::Index kk = Eigen::Index(cfg.kernel) * cfg.kernel;
  Eigen::Index off = 0;
  for (int l = 0; l <= cfg.depth; ++l) {
    const Eigen::Index cin = l == 0 ? 1 : cfg.filters;
    const Eigen::Index cout = l == cfg.depth ? 1 : cfg.filters;
    lay.layers.push_back({off, off + cout * cin * kk, cin, cout, kk});
    off += cout * cin * kk + cout;
  }
  lay.total = off;
  return lay;
}

template <typename Scalar>
using FeatureMap =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using WeightMap = Eigen::Map<const FeatureMap<Scalar>>;

// "Same" zero-padded patch matrix: row cin*k*k + ky*k + kx of the
// result holds channel cin shifted by (ky - r, kx - r).
template <typename Scalar>
FeatureMap<Scalar> im2col(const FeatureMap<Scalar>& x, Eigen::Index h,
                          Eigen::Index w, int k) {
  const Eigen::Index cin = x.rows();
  const Eigen::Index r = (k - 1) / 2;
  FeatureMap<Scalar> col = FeatureMap<Scalar>::Zero(cin * k * k, h * w);
  for (Eigen::Index c = 0; c < cin; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      const Eigen::Index dy = ky - r;
      const Eigen::Index i0 = std::max<Eigen::Index>(0, -dy);
      const Eigen::Index i1 = std::min(h, h - dy);
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index dx = kx - r;
        const Eigen::Index j0 = std::max<Eigen::Index>(0, -dx);
        const Eigen::Index len = std::min(w, w - dx) - j0;
        if (len <= 0) continue;
        const Eigen::Index row = c * k * k + ky * k + kx;
        for (Eigen::Index i = i0; i < i1; ++i)
          col.row(row).segment(i * w + j0, len) =
              x.row(c).segment((i + dy) * w + j0 + dx, len);
      }
    }
  }
  return col;
}

// Adjoint of im2col: scatter-adds patch gradients back onto channels.
template <typename Scalar>
FeatureMap<Scalar> col2im(const FeatureMap<Scalar>& dcol, Eigen::Index cin,
                          Eigen::Index h, Eigen::Index w, int k) {
  const Eigen::Index r = (k - 1) / 2;
  FeatureMap<Scalar> dx_map = FeatureMap<Scalar>::Zero(cin, h * w);
  for (Eigen::Index c = 0; c < cin; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      const Eigen::Index dy = ky - r;
      const Eigen::Index i0 = std::max<Eigen::Index>(0, -dy);
      const Eigen::Index i1 = std::min(h, h - dy);
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index dx = kx - r;
        const Eigen::Index j0 = std::max<Eigen::Index>(0, -dx);
        const Eigen::Index len = std::min(w, w - dx) - j0;
        if (len <= 0) continue;
        const Eigen::Index row = c * k * k + ky * k + kx;
        for (Eigen::Index i = i0; i < i1; ++i)
          dx_map.row(c).segment((i + dy) * w + j0 + dx, len) +=
              dcol.row(row).segment(i * w + j0, len);
      }
    }
  }
  return dx_map;
}

template <typename Scalar>
FeatureMap<Scalar> upsample_channels(const FeatureMap<Scalar>& x,
                                     Eigen::Index h, Eigen::Index w) {
  FeatureMap<Scalar> out(x.rows(), 4 * h * w);
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    Eigen::Map<const GridT<Scalar>> ch(x.row(c).data(), h, w);
    GridT<Scalar> up = resize_bilinear_x2<Scalar>(ch);
    std::memcpy(out.row(c).data(), up.data(), sizeof(Scalar) * up.size());
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> upsample_adjoint_channels(const FeatureMap<Scalar>& g,
                                             Eigen::Index h, Eigen::Index w) {
  // h, w are the *source* extents
  FeatureMap<Scalar> out(g.rows(), h * w);
  for (Eigen::Index c = 0; c < g.rows(); ++c) {
    Eigen::Map<const GridT<Scalar>> ch(g.row(c).data(), 2 * h, 2 * w);
    GridT<Scalar> down = resize_bilinear_x2_adjoint<Scalar>(ch, h, w);
    std::memcpy(out.row(c).data(), down.data(), sizeof(Scalar) * down.size());
  }
  return out;
}

}  // namespace

std::int64_t count_params(const NetConfig& config) {
  return make_layout(config).total;
}

template <typename Scalar>
NetParamsT<Scalar> init_params(RngState& rng, const NetConfig& config) {
  const Layout lay = make_layout(config);
  NetParamsT<Scalar> p;
  p.flat = Eigen::Vector<Scalar, Eigen::Dynamic>::Zero(lay.total);
  for (const auto& L : lay.layers) {
    const double fan_in = double(L.cin * L.kk);
    const double stdev = std::sqrt(
        2.0 / ((1.0 + config.leaky_slope * config.leaky_slope) * fan_in));
    for (Eigen::Index i = 0; i < L.cout * L.cin * L.kk; ++i)
      p.flat[L.w_offset + i] = static_cast<Scalar>(stdev * rng.normal());
    // biases stay zero
  }
  return p;
}

template <typename Scalar>
GridT<Scalar> softmax_global(const GridT<Scalar>& logits) {
  if (!logits.isFinite().all())
    throw std::invalid_argument("softmax_global: non-finite logits");
  const Scalar m = logits.maxCoeff();
  GridT<Scalar> e = (logits - m).exp();
  return e / e.sum();
}

namespace {

template <typename Scalar>
GridT<Scalar> run_forward(const NetParamsT<Scalar>& params,
                          const NetConfig& cfg, const GridT<Scalar>& input,
                          RngState* drop_rng, ForwardCacheT<Scalar>* cache) {
  const Layout lay = make_layout(cfg);
  if (params.flat.size() != lay.total)
    throw std::invalid_argument("net: parameter vector does not match config");
  if (input.rows() < cfg.kernel || input.cols() < cfg.kernel)
    throw std::invalid_argument("net: input smaller than the kernel");
  if (cache) {
    cache->layers.clear();
    cache->layers.resize(lay.layers.size());
  }

  Eigen::Index h = input.rows(), w = input.cols();
  FeatureMap<Scalar> x(1, h * w);
  std::memcpy(x.data(), input.data(), sizeof(Scalar) * input.size());

  const bool use_dropout = cache && drop_rng && cfg.dropout_rate > 0;
  const Scalar keep = Scalar(1) - Scalar(cfg.dropout_rate);
  const Scalar slope = static_cast<Scalar>(cfg.leaky_slope);

  for (int l = 0; l <= cfg.depth; ++l) {
    const auto& L = lay.layers[size_t(l)];
    WeightMap<Scalar> W(params.flat.data() + L.w_offset, L.cout, L.cin * L.kk);
    Eigen::Map<const Eigen::Vector<Scalar, Eigen::Dynamic>> b(
        params.flat.data() + L.b_offset, L.cout);

    FeatureMap<Scalar> col = im2col<Scalar>(x, h, w, cfg.kernel);
    FeatureMap<Scalar> z = W * col;
    z.colwise() += b;

    if (cache) {
      auto& cl = cache->layers[size_t(l)];
      cl.cols = std::move(col);  // patch matrix, reused by backward
      cl.in_h = h;
      cl.in_w = w;
    }

    if (l == cfg.depth) {
      Eigen::Map<const GridT<Scalar>> logits(z.data(), h, w);
      GridT<Scalar> out = softmax_global<Scalar>(logits);
      if (cache) cache->output = out;
      return out;
    }

    if (cache) cache->layers[size_t(l)].pre_act = z;
    x = (z.array() > Scalar(0)).select(z.array(), slope * z.array()).matrix();

    if (use_dropout) {
      FeatureMap<Scalar> mask(x.rows(), x.cols());
      Scalar* m = mask.data();
      for (Eigen::Index i = 0; i < mask.size(); ++i)
        m[i] = drop_rng->uniform() < cfg.dropout_rate ? Scalar(0)
                                                      : Scalar(1) / keep;
      x.array() *= mask.array();
      cache->layers[size_t(l)].drop_mask = std::move(mask);
    }

    if (std::find(cfg.upsample_after.begin(), cfg.upsample_after.end(), l + 1) !=
        cfg.upsample_after.end()) {
      x = upsample_channels<Scalar>(x, h, w);
      h *= 2;
      w *= 2;
      if (cache) cache->layers[size_t(l)].upsampled = true;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

template <typename Scalar>
GridT<Scalar> forward_eval(const NetParamsT<Scalar>& params,
                           const NetConfig& config, const GridT<Scalar>& input) {
  return run_forward<Scalar>(params, config, input, nullptr, nullptr);
}

template <typename Scalar>
GridT<Scalar> forward_train(const NetParamsT<Scalar>& params,
                            const NetConfig& config, const GridT<Scalar>& input,
                            RngState& rng, ForwardCacheT<Scalar>& cache) {
  return run_forward<Scalar>(params, config, input, &rng, &cache);
}

template <typename Scalar>
BackwardResultT<Scalar> backward(const NetParamsT<Scalar>& params,
                                 const NetConfig& config,
                                 const ForwardCacheT<Scalar>& cache,
                                 const GridT<Scalar>& output_grad) {
  const Layout lay = make_layout(config);
  if (params.flat.size() != lay.total)
    throw std::invalid_argument("net backward: parameter/config mismatch");
  if (cache.layers.size() != lay.layers.size() || cache.output.size() == 0)
    throw std::invalid_argument("net backward: cache does not match config");
  if (output_grad.rows() != cache.output.rows() ||
      output_grad.cols() != cache.output.cols())
    throw std::invalid_argument("net backward: output_grad shape mismatch");

  BackwardResultT<Scalar> res;
  res.param_grads = Eigen::Vector<Scalar, Eigen::Dynamic>::Zero(lay.total);

  // softmax Jacobian: dl = p .* (g - <g, p>)
  const GridT<Scalar>& p = cache.output;
  const Scalar inner = (output_grad * p).sum();
  GridT<Scalar> dlogits = p * (output_grad - inner);

  FeatureMap<Scalar> dz(1, dlogits.size());
  std::memcpy(dz.data(), dlogits.data(), sizeof(Scalar) * dlogits.size());

  const Scalar slope = static_cast<Scalar>(config.leaky_slope);

  for (int l = config.depth; l >= 0; --l) {
    const auto& L = lay.layers[size_t(l)];
    const auto& cl = cache.layers[size_t(l)];
    WeightMap<Scalar> W(params.flat.data() + L.w_offset, L.cout, L.cin * L.kk);

    Eigen::Map<FeatureMap<Scalar>> dW(res.param_grads.data() + L.w_offset,
                                      L.cout, L.cin * L.kk);
    Eigen::Map<Eigen::Vector<Scalar, Eigen::Dynamic>> db(
        res.param_grads.data() + L.b_offset, L.cout);
    dW = dz * cl.cols.transpose();
    db = dz.rowwise().sum();

    FeatureMap<Scalar> dcol = W.transpose() * dz;
    FeatureMap<Scalar> dx =
        col2im<Scalar>(dcol, L.cin, cl.in_h, cl.in_w, config.kernel);

    if (l == 0) {
      res.input_grad = GridT<Scalar>(cl.in_h, cl.in_w);
      std::memcpy(res.input_grad.data(), dx.data(), sizeof(Scalar) * dx.size());
      return res;
    }

    const auto& prev = cache.layers[size_t(l - 1)];
    if (prev.upsampled)
      dx = upsample_adjoint_channels<Scalar>(dx, cl.in_h / 2, cl.in_w / 2);
    if (prev.drop_mask.size() > 0) dx.array() *= prev.drop_mask.array();
    dz = (prev.pre_act.array() > Scalar(0))
             .select(dx.array(), slope * dx.array())
             .matrix();
  }
  throw std::logic_error("unreachable");
}

namespace {

void write_tensor_f64(std::ostream& os, const std::vector<std::uint64_t>& dims,
                      const double* data, std::uint64_t n) {
  os.write("QSRT", 4);
  os.put(0x01);  // version
  os.put(0x01);  // f64
  os.put(static_cast<char>(dims.size()));
  for (std::uint64_t d : dims) os.write(reinterpret_cast<const char*>(&d), 8);
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(8 * n));
}

std::vector<double> read_tensor_f64(std::istream& is,
                                    const std::vector<std::uint64_t>& expect,
                                    const std::string& what) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "QSRT", 4) != 0)
    throw std::runtime_error("qsrw: bad tensor magic for " + what);
  if (is.get() != 0x01) throw std::runtime_error("qsrw: bad tensor version");
  if (is.get() != 0x01) throw std::runtime_error("qsrw: expected f64 payload");
  const int rank = is.get();
  if (rank != static_cast<int>(expect.size()))
    throw std::runtime_error("qsrw: rank mismatch for " + what);
  std::uint64_t n = 1;
  for (size_t i = 0; i < expect.size(); ++i) {
    std::uint64_t d = 0;
    is.read(reinterpret_cast<char*>(&d), 8);
    if (d != expect[i])
      throw std::runtime_error("qsrw: shape mismatch for " + what + ": dim " +
                               std::to_string(i) + " is " + std::to_string(d) +
                               ", expected " + std::to_string(expect[i]));
    n *= d;
  }
  std::vector<double> buf(n);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(8 * n));
  if (!is) throw std::runtime_error("qsrw: truncated tensor for " + what);
  return buf;
}

json net_config_to_json(const NetConfig& c) {
  return json{{"depth", c.depth},
              {"filters", c.filters},
              {"kernel", c.kernel},
              {"leaky_slope", c.leaky_slope},
              {"dropout_rate", c.dropout_rate},
              {"upsample_after", c.upsample_after}};
}

NetConfig net_config_from_json(const json& j) {
  NetConfig c;
  c.depth = j.at("depth").get<int>();
  c.filters = j.at("filters").get<int>();
  c.kernel = j.at("kernel").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.upsample_after = j.at("upsample_after").get<std::vector<int>>();
  c.validate();
  return c;
}

}  // namespace

template <typename Scalar>
void save_weights(const std::string& path, const NetParamsT<Scalar>& params,
                  const NetConfig& config) {
  const Layout lay = make_layout(config);
  if (params.flat.size() != lay.total)
    throw std::invalid_argument("save_weights: parameter/config mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write("QSRW", 4);
  os.put(0x01);
  const std::string cj = net_config_to_json(config).dump();
  const auto len = static_cast<std::uint32_t>(cj.size());
  os.write(reinterpret_cast<const char*>(&len), 4);
  os.write(cj.data(), len);

  const auto k = static_cast<std::uint64_t>(config.kernel);
  for (const auto& L : lay.layers) {
    Eigen::VectorXd w =
        params.flat.segment(L.w_offset, L.cout * L.cin * L.kk)
            .template cast<double>();
    write_tensor_f64(os,
                     {std::uint64_t(L.cout), std::uint64_t(L.cin), k, k},
                     w.data(), std::uint64_t(w.size()));
    Eigen::VectorXd b =
        params.flat.segment(L.b_offset, L.cout).template cast<double>();
    write_tensor_f64(os, {std::uint64_t(L.cout)}, b.data(),
                     std::uint64_t(b.size()));
  }
  if (!os) throw std::runtime_error("save_weights: write failed");
}

template <typename Scalar>
NetParamsT<Scalar> load_weights(const std::string& path, NetConfig& config) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "QSRW", 4) != 0)
    throw std::runtime_error("qsrw: bad magic in " + path);
  const int version = is.get();
  if (version != 0x01)
    throw std::runtime_error("qsrw: unsupported version " +
                             std::to_string(version));
  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 4);
  std::string cj(len, '\0');
  is.read(cj.data(), len);
  if (!is) throw std::runtime_error("qsrw: truncated config block");
  config = net_config_from_json(json::parse(cj));

  const Layout lay = make_layout(config);
  NetParamsT<Scalar> p;
  p.flat = Eigen::Vector<Scalar, Eigen::Dynamic>::Zero(lay.total);
  const auto k = static_cast<std::uint64_t>(config.kernel);
  for (size_t li = 0; li < lay.layers.size(); ++li) {
    const auto& L = lay.layers[li];
    const std::string what = "layer " + std::to_string(li);
    auto w = read_tensor_f64(
        is, {std::uint64_t(L.cout), std::uint64_t(L.cin), k, k}, what);
    for (size_t i = 0; i < w.size(); ++i)
      p.flat[L.w_offset + Eigen::Index(i)] = static_cast<Scalar>(w[i]);
    auto b = read_tensor_f64(is, {std::uint64_t(L.cout)}, what + " bias");
    for (size_t i = 0; i < b.size(); ++i)
      p.flat[L.b_offset + Eigen::Index(i)] = static_cast<Scalar>(b[i]);
  }
  return p;
}

// explicit instantiations
template NetParamsT<double> init_params<double>(RngState&, const NetConfig&);
template NetParamsT<float> init_params<float>(RngState&, const NetConfig&);
template GridT<double> softmax_global<double>(const GridT<double>&);
template GridT<float> softmax_global<float>(const GridT<float>&);
template GridT<double> forward_eval<double>(const NetParamsT<double>&,
                                            const NetConfig&, const GridT<double>&);
template GridT<float> forward_eval<float>(const NetParamsT<float>&,
                                          const NetConfig&, const GridT<float>&);
template GridT<double> forward_train<double>(const NetParamsT<double>&,
                                             const NetConfig&, const GridT<double>&,
                                             RngState&, ForwardCacheT<double>&);
template GridT<float> forward_train<float>(const NetParamsT<float>&,
                                           const NetConfig&, const GridT<float>&,
                                           RngState&, ForwardCacheT<float>&);
template BackwardResultT<double> backward<double>(const NetParamsT<double>&,
                                                  const NetConfig&,
                                                  const ForwardCacheT<double>&,
                                                  const GridT<double>&);
template BackwardResultT<float> backward<float>(const NetParamsT<float>&,
                                                const NetConfig&,
                                                const ForwardCacheT<float>&,
                                                const GridT<float>&);
template void save_weights<double>(const std::string&, const NetParamsT<double>&,
                                   const NetConfig&);
template void save_weights<float>(const std::string&, const NetParamsT<float>&,
                                  const NetConfig&);
template NetParamsT<double> load_weights<double>(const std::string&, NetConfig&);
template NetParamsT<float> load_weights<float>(const std::string&, NetConfig&);

}  // namespace qsr
