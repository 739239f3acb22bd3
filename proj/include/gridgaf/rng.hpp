#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace gridgaf {

// SplitMix64 finalizer, used to whiten seeds and derive substream ids.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent substream seed from a base seed and up to two stream indices.
// Every seeded component of the pipeline (per-event generation, per-class
// shuffles, per-epoch reshuffles, ...) draws from its own derived stream so
// results do not depend on evaluation order.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a,
                                      std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

// Deterministic PRNG: std::mt19937_64 engine (its output sequence is pinned
// by the C++ standard) with hand-rolled distributions, so integer streams and
// shuffles are identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // unbiased integer in [0, n), rejection sampled
  std::uint64_t below(std::uint64_t n) {
    assert(n > 0);
    const std::uint64_t rem = ~std::uint64_t{0} % n;
    const std::uint64_t lim = ~std::uint64_t{0} - rem;  // multiple of n
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= lim);
    return x % n;
  }

  // standard normal via Box-Muller; draws two uniforms per call, no cached
  // second value, so consumption is one fixed stride per call
  double gaussian() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace gridgaf
