#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace deadtime {

// splitmix64 step; also used to derive independent sub-stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a decorrelated seed for a named sub-stream (thinning, background run, ...)
// so one trial seed can drive several independent generators.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_tag) {
  std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (stream_tag + 1));
  std::uint64_t a = splitmix64(s);
  return splitmix64(s) ^ a;
}

// xoshiro256++ with splitmix64 seeding. Hand-rolled (rather than <random>) so that
// sequences are identical across compilers and platforms; reproducibility of the
// experiment CSVs depends on it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Exact Poisson sampling. Direct product-of-uniforms for small means; larger means
  // are split recursively (Poisson(a+b) = Poisson(a) + Poisson(b)) to avoid underflow.
  std::uint64_t poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    std::uint64_t total = 0;
    while (mean > 32.0) {
      total += poisson_direct(16.0);
      mean -= 16.0;
    }
    return total + poisson_direct(mean);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t poisson_direct(double mean) {
    const double limit = std::exp(-mean);
    std::uint64_t count = 0;
    double product = uniform();
    while (product > limit) {
      ++count;
      product *= uniform();
    }
    return count;
  }

  std::array<std::uint64_t, 4> s_;
};

}  // namespace deadtime
