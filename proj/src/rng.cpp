#include "qsr/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace qsr {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

RngState RngState::seeded(std::uint64_t seed) {
  return RngState{mix(seed + kGolden), 0};
}

RngState RngState::child(std::uint64_t index) const {
  RngState c;
  c.key = mix(key ^ mix(index + 0x6A09E667F3BCC909ULL));
  c.ctr = 0;
  return c;
}

std::uint64_t RngState::next_u64() {
  return mix(key + kGolden * ++ctr);
}

double RngState::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::uint64_t RngState::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(m >> 64);
}

double RngState::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::uint64_t poisson_sample(RngState& rng, double mean) {
  if (!(mean >= 0) || !std::isfinite(mean))
    throw std::invalid_argument("poisson_sample: mean must be finite and >= 0");
  if (mean == 0) return 0;

  if (mean < 30.0) {
    // Knuth: count uniforms until their product drops below e^-mean.
    const double limit = std::exp(-mean);
    double prod = 1.0;
    std::uint64_t k = 0;
    for (;;) {
      prod *= rng.uniform();
      if (prod < limit) return k;
      ++k;
    }
  }

  // PTRS (Hormann 1993), exact rejection sampler for large means.
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    double u = rng.uniform() - 0.5;
    double v = rng.uniform();
    double us = 0.5 - std::abs(u);
    double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
    if (kf < 0 || (us < 0.013 && v > us)) continue;
    double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    double rhs = kf * log_mean - mean - std::lgamma(kf + 1.0);
    if (lhs <= rhs) return static_cast<std::uint64_t>(kf);
  }
}

}  // namespace qsr
