#ifndef QSR_DATASET_HPP
#define QSR_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "qsr/scene.hpp"

namespace qsr {

struct PairMeta {
  PsfSpec psf;
  double background_mean = 0;
  std::uint64_t seed_index = 0;  // child index under the generation seed
};

struct SamplePair {
  Grid input;   // lo x lo photon counts
  Grid target;  // hi x hi, L1-normalized probability mass
  PairMeta meta;
};

struct DatasetManifest {
  std::vector<std::string> archives;
  std::uint64_t count = 0;
  std::uint64_t global_seed = 0;
  SceneConfig scene;
  std::string created;  // empty when read from the deterministic footer
};

// Pair i is derived from rng.child(i), so pairs are independent and a
// subset can be regenerated without the rest. Scenes whose ground
// truth comes out all-zero are resampled up to 10 times.
std::vector<SamplePair> generate_pairs(const RngState& rng,
                                       const SceneConfig& config,
                                       std::uint64_t n);

struct SplitIndices {
  std::vector<std::uint64_t> train;
  std::vector<std::uint64_t> val;
};

// Deterministic split by index hash: indices ranked by hash(seed, i),
// the lowest round(fraction * n) go to validation.
SplitIndices split_validation(std::uint64_t n, double fraction,
                              std::uint64_t seed);

// Archive layout (byte-exact, see docs/formats.md):
//   "QSRA" 0x01 | per pair: input qsrt, target qsrt, u32 LE meta length,
//   meta JSON | manifest JSON | u64 LE manifest length | "QSRM"
void save_archive(const std::string& path, const std::vector<SamplePair>& pairs,
                  std::uint64_t global_seed, const SceneConfig& scene);
std::vector<SamplePair> load_archive(const std::string& path);
DatasetManifest read_manifest(const std::string& path);

}  // namespace qsr

#endif
