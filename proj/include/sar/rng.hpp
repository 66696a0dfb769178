#pragma once

#include <cstdint>
#include <vector>

namespace sar {

// splitmix64: tiny, fast, and identical on every platform. All randomness in
// the project flows through this so that a (config, seed) pair pins every
// output bit-for-bit.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t next_below(uint64_t n) {
    // Rejection-free modulo bias is negligible for desk-scale n, but keep it
    // exact anyway so regeneration never depends on n's magnitude.
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  int next_int(int lo, int hi) {  // inclusive range [lo, hi]
    return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Derive an independent substream, e.g. one per image. Mixing through one
  // splitmix64 step keeps substreams decorrelated from the parent.
  Rng substream(uint64_t index) const {
    Rng mix(state_ ^ (0x94d049bb133111ebULL * (index + 1)));
    return Rng(mix.next_u64());
  }

  // Fisher-Yates; std::shuffle is implementation-defined, this is not.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace sar
