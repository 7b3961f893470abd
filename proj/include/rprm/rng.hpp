#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rprm {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic RNG with hand-rolled draws so that sampled streams are
// pinned by the seed alone, independent of the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(splitmix64(seed)) {}

  // Uniform on the open interval (0, 1).
  double uniform() { return (double(gen_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  // Integer in [0, n). Modulo bias is negligible for the small n used here.
  uint64_t below(uint64_t n) { return gen_() % n; }

  uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

// Derives an independent stream from (seed, stream) so that parallel or
// per-sequence generation stays reproducible.
inline Rng derive_rng(uint64_t seed, uint64_t stream) {
  return Rng(splitmix64(seed ^ splitmix64(stream + 0x51ed2701)));
}

}  // namespace rprm
