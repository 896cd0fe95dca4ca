#ifndef QSR_RNG_HPP
#define QSR_RNG_HPP

#include <cstdint>

namespace qsr {

// Counter-based generator: the output stream is a pure function of
// (key, counter), so states can be forked into independent children
// for parallel data generation without coordination.
struct RngState {
  std::uint64_t key = 0;
  std::uint64_t ctr = 0;

  static RngState seeded(std::uint64_t seed);

  // Independent child stream; child(i) != child(j) for i != j.
  RngState child(std::uint64_t index) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer on [0, n), n > 0. Lemire reduction, no rejection loop.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }
};

// Exact Poisson sampling: Knuth multiplication below mean 30,
// Hormann's PTRS transformed rejection above. Throws on negative or
// non-finite mean.
std::uint64_t poisson_sample(RngState& rng, double mean);

}  // namespace qsr

#endif
