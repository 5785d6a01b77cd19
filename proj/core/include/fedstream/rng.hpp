#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fedstream {

// Deterministic RNG. The mt19937_64 bit stream is fully specified by the
// standard; the distribution mappings below are hand-rolled because
// std::*_distribution output is implementation-defined and envelopes and
// reports must be bitwise reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  size_t index(size_t n) {
    if (n == 0) return 0;
    size_t i = static_cast<size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  // Box-Muller, one value per call (the pair's second half is discarded to
  // keep the draw count per event fixed).
  double gaussian(double mean, double stddev) {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  // Knuth's product method; fine for small lambda.
  uint32_t poisson(double lambda) {
    const double limit = std::exp(-lambda);
    uint32_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace fedstream
