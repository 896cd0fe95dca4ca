#include "qsr/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qsr/serialize.hpp"
#include "qsr/tensor_io.hpp"

namespace qsr {

using nlohmann::json;

void to_json(json& j, const PsfSpec& s) {
  j = json{{"kind", to_string(s.kind)},
           {"fwhm_px", s.fwhm_px},
           {"squeeze", s.squeeze},
           {"axis_angle", s.axis_angle}};
}

void from_json(const json& j, PsfSpec& s) {
  s.kind = psf_kind_from_string(j.at("kind").get<std::string>());
  s.fwhm_px = j.at("fwhm_px").get<double>();
  s.squeeze = j.at("squeeze").get<double>();
  s.axis_angle = j.at("axis_angle").get<double>();
}

void to_json(json& j, const SceneConfig& c) {
  j = json{{"hi_size", c.hi_size},
           {"lo_size", c.lo_size},
           {"n_emitters_range", {c.n_emitters_min, c.n_emitters_max}},
           {"fwhm_range", {c.fwhm_min, c.fwhm_max}},
           {"intensity_range", {c.intensity_min, c.intensity_max}},
           {"background_range", {c.background_min, c.background_max}},
           {"squeeze_min", c.squeeze_min},
           {"cluster_fraction", c.cluster_fraction},
           {"psf_kinds", [&] {
              json kinds = json::array();
              if (c.use_gaussian) kinds.push_back("gaussian");
              if (c.use_airy) kinds.push_back("airy");
              return kinds;
            }()}};
}

void from_json(const json& j, SceneConfig& c) {
  if (j.contains("hi_size")) c.hi_size = j.at("hi_size").get<Eigen::Index>();
  if (j.contains("lo_size")) c.lo_size = j.at("lo_size").get<Eigen::Index>();
  if (j.contains("n_emitters_range")) {
    c.n_emitters_min = j.at("n_emitters_range").at(0).get<int>();
    c.n_emitters_max = j.at("n_emitters_range").at(1).get<int>();
  }
  if (j.contains("fwhm_range")) {
    c.fwhm_min = j.at("fwhm_range").at(0).get<double>();
    c.fwhm_max = j.at("fwhm_range").at(1).get<double>();
  }
  if (j.contains("intensity_range")) {
    c.intensity_min = j.at("intensity_range").at(0).get<double>();
    c.intensity_max = j.at("intensity_range").at(1).get<double>();
  }
  if (j.contains("background_range")) {
    c.background_min = j.at("background_range").at(0).get<double>();
    c.background_max = j.at("background_range").at(1).get<double>();
  }
  if (j.contains("squeeze_min")) c.squeeze_min = j.at("squeeze_min").get<double>();
  if (j.contains("cluster_fraction"))
    c.cluster_fraction = j.at("cluster_fraction").get<double>();
  if (j.contains("psf_kinds")) {
    c.use_gaussian = false;
    c.use_airy = false;
    for (const auto& k : j.at("psf_kinds")) {
      const auto kind = psf_kind_from_string(k.get<std::string>());
      if (kind == PsfKind::gaussian) c.use_gaussian = true;
      else c.use_airy = true;
    }
  }
  c.validate();
}

std::vector<SamplePair> generate_pairs(const RngState& rng,
                                       const SceneConfig& config,
                                       std::uint64_t n) {
  config.validate();
  std::vector<SamplePair> pairs;
  pairs.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    RngState pair_rng = rng.child(i);
    Grid truth;
    SampledScene scene;
    bool ok = false;
    for (int attempt = 0; attempt < 10; ++attempt) {
      RngState r = pair_rng.child(attempt);
      scene = sample_scene(r, config);
      truth = rasterize_ground_truth(r, scene.emitters);
      if (truth.sum() > 0) {
        SamplePair p;
        p.target = truth / truth.sum();
        Grid psf = render_psf(scene.psf);
        p.input = synthesize_frame(r, truth, psf, scene.background_mean);
        p.meta = PairMeta{scene.psf, scene.background_mean, i};
        pairs.push_back(std::move(p));
        ok = true;
        break;
      }
    }
    if (!ok)
      throw std::runtime_error("generate_pairs: pair " + std::to_string(i) +
                               " produced zero ground-truth flux 10 times");
  }
  return pairs;
}

SplitIndices split_validation(std::uint64_t n, double fraction,
                              std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1))
    throw std::invalid_argument("split_validation: fraction must be in (0, 1)");
  const auto n_val =
      static_cast<std::uint64_t>(std::llround(fraction * double(n)));
  std::vector<std::uint64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngState h = RngState::seeded(seed);
  std::vector<std::uint64_t> hashes(n);
  for (std::uint64_t i = 0; i < n; ++i) hashes[i] = h.child(i).key;
  std::sort(order.begin(), order.end(), [&](std::uint64_t a, std::uint64_t b) {
    return hashes[a] != hashes[b] ? hashes[a] < hashes[b] : a < b;
  });
  SplitIndices s;
  s.val.assign(order.begin(), order.begin() + n_val);
  s.train.assign(order.begin() + n_val, order.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

namespace {

constexpr char kArchiveMagic[4] = {'Q', 'S', 'R', 'A'};
constexpr char kFooterMagic[4] = {'Q', 'S', 'R', 'M'};

}  // namespace

void save_archive(const std::string& path, const std::vector<SamplePair>& pairs,
                  std::uint64_t global_seed, const SceneConfig& scene) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kArchiveMagic, 4);
  os.put(0x01);
  for (const SamplePair& p : pairs) {
    write_qsrt(os, p.input);
    write_qsrt(os, p.target);
    json meta{{"psf", p.meta.psf},
              {"background_mean", p.meta.background_mean},
              {"seed_index", p.meta.seed_index}};
    const std::string m = meta.dump();
    const auto len = static_cast<std::uint32_t>(m.size());
    os.write(reinterpret_cast<const char*>(&len), 4);
    os.write(m.data(), static_cast<std::streamsize>(m.size()));
  }
  json manifest{{"count", pairs.size()},
                {"global_seed", global_seed},
                {"scene", scene}};
  const std::string m = manifest.dump();
  os.write(m.data(), static_cast<std::streamsize>(m.size()));
  const auto len = static_cast<std::uint64_t>(m.size());
  os.write(reinterpret_cast<const char*>(&len), 8);
  os.write(kFooterMagic, 4);
  if (!os) throw std::runtime_error("archive: write failed for " + path);
}

namespace {

json read_footer(std::ifstream& is, const std::string& path) {
  is.seekg(0, std::ios::end);
  const std::streamoff size = is.tellg();
  if (size < 17) throw std::runtime_error("archive too short: " + path);
  char tail[12];
  is.seekg(size - 12);
  is.read(tail, 12);
  if (std::memcmp(tail + 8, kFooterMagic, 4) != 0)
    throw std::runtime_error("archive footer magic missing: " + path);
  std::uint64_t mlen;
  std::memcpy(&mlen, tail, 8);
  if (static_cast<std::streamoff>(mlen) > size - 17)
    throw std::runtime_error("archive manifest length corrupt: " + path);
  std::string m(mlen, '\0');
  is.seekg(size - 12 - static_cast<std::streamoff>(mlen));
  is.read(m.data(), static_cast<std::streamsize>(mlen));
  return json::parse(m);
}

void read_header(std::ifstream& is, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kArchiveMagic, 4) != 0)
    throw std::runtime_error("archive: bad magic in " + path);
  const int version = is.get();
  if (version != 0x01)
    throw std::runtime_error("archive: unsupported version " +
                             std::to_string(version) + " in " + path);
}

}  // namespace

std::vector<SamplePair> load_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  const json manifest = read_footer(is, path);
  const auto count = manifest.at("count").get<std::uint64_t>();
  is.seekg(0);
  read_header(is, path);
  std::vector<SamplePair> pairs;
  pairs.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    SamplePair p;
    p.input = read_qsrt(is);
    p.target = read_qsrt(is);
    std::uint32_t len = 0;
    is.read(reinterpret_cast<char*>(&len), 4);
    std::string m(len, '\0');
    is.read(m.data(), len);
    if (!is)
      throw std::runtime_error("archive: truncated at pair " + std::to_string(i) +
                               " (offset " + std::to_string(is.tellg()) + ")");
    const json meta = json::parse(m);
    p.meta.psf = meta.at("psf").get<PsfSpec>();
    p.meta.background_mean = meta.at("background_mean").get<double>();
    p.meta.seed_index = meta.at("seed_index").get<std::uint64_t>();
    pairs.push_back(std::move(p));
  }
  return pairs;
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  read_header(is, path);
  const json m = read_footer(is, path);
  DatasetManifest d;
  d.archives = {path};
  d.count = m.at("count").get<std::uint64_t>();
  d.global_seed = m.at("global_seed").get<std::uint64_t>();
  d.scene = m.at("scene").get<SceneConfig>();
  return d;
}

}  // namespace qsr
