#pragma once

#include <cstdint>
#include <random>

namespace rovo {

// splitmix64 of (a, b); used to derive independent stream seeds so that
// per-frame / per-iteration randomness is reproducible in any order.
uint64_t mix_seed(uint64_t a, uint64_t b);

// mt19937_64 plus hand-rolled value mappings. The standard distributions are
// implementation-defined, these are not, so seeded outputs are stable across
// compilers.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // [0, n), n > 0
  int uniform_int(int n) {
    return static_cast<int>(
        (static_cast<unsigned __int128>(engine_()) * static_cast<uint64_t>(n)) >> 64);
  }

  // Standard normal via Box-Muller (cosine branch only).
  double gaussian();

 private:
  std::mt19937_64 engine_;
};

}  // namespace rovo
