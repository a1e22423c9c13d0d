#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace gpcm {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/* Splittable seed derivation: FNV-1a over the tag string and the 64-bit
 * fields, xor-folded into the base seed, then finalized with splitmix64.
 * Every seed the harness uses is derived this way, so a run is fully
 * reproducible from (base_seed, tag, fields) alone. */
inline uint64_t derive_seed(uint64_t base, std::string_view tag,
                            std::initializer_list<uint64_t> fields = {}) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) h = (h ^ c) * 0x100000001b3ULL;
  for (uint64_t f : fields)
    for (int b = 0; b < 8; ++b)
      h = (h ^ ((f >> (8 * b)) & 0xff)) * 0x100000001b3ULL;
  return splitmix64(base ^ h);
}

/* mt19937_64 with explicit transforms (no std::*_distribution), so draw
 * sequences are identical across standard libraries and platforms. */
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes two draws per call, no cached spare.
  double normal() {
    double u1 = ((engine_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Unbiased integer in [0, n) by rejection.
  uint64_t uniform_int(uint64_t n) {
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Inverse-CDF draw from a probability vector (assumed to sum to ~1).
  int categorical(std::span<const double> probs) {
    double u = uniform();
    double cum = 0.0;
    int m = static_cast<int>(probs.size());
    for (int k = 0; k < m; ++k) {
      cum += probs[k];
      if (u < cum) return k;
    }
    return m - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gpcm
