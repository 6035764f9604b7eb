#pragma once

#include <cmath>
#include <cstdint>

namespace coincide {

namespace detail {
// Stateless splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Derives an unrelated seed from (seed, salt); used to key parameter-scan
// cells and other top-level experiment branches.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return detail::mix64(detail::mix64(seed + 0x9e3779b97f4a7c15ull) ^ (salt + 0x2545f4914f6cdd1dull));
}

// xoshiro256++ with explicitly derived substreams. Simulation code never
// goes through <random> distributions, so every stream is bit-reproducible
// across platforms and independent of thread scheduling.
class Rng {
 public:
  // Stream id reserved for per-repetition parameter draws (trial streams
  // use their 0-based trial index).
  static constexpr std::uint64_t kParamStream = ~0ull;

  explicit Rng(std::uint64_t seed) { reseed(detail::mix64(seed + 0x9e3779b97f4a7c15ull)); }

  // Substream keyed by (seed, repetition, stream). Keys are absorbed through
  // the splitmix64 finalizer so nearby keys give unrelated states.
  Rng(std::uint64_t seed, std::uint64_t repetition, std::uint64_t stream) {
    std::uint64_t key = detail::mix64(seed + 0x9e3779b97f4a7c15ull);
    key = detail::mix64(key ^ (repetition + 0x9e3779b97f4a7c15ull));
    key = detail::mix64(key ^ (stream + 0x2545f4914f6cdd1dull));
    reseed(key);
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

  // Uniform on [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  // Exponential with the given rate (mean 1/rate).
  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  // Poisson by multiplication of uniforms; large means are split in half
  // recursively (sums of independent Poisson halves are exact).
  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::uint64_t n = 0;
    while (mean > 30.0) {
      n += poisson_small(mean / 2.0);
      mean /= 2.0;
    }
    return n + poisson_small(mean);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  void reseed(std::uint64_t key) {
    std::uint64_t st = key;
    for (auto& w : s_) {
      st += 0x9e3779b97f4a7c15ull;
      w = detail::mix64(st);
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is invalid
  }

  std::uint64_t poisson_small(double mean) {
    const double limit = std::exp(-mean);
    std::uint64_t n = 0;
    double prod = uniform01();
    while (prod > limit) {
      ++n;
      prod *= uniform01();
    }
    return n;
  }

  std::uint64_t s_[4]{};
};

}  // namespace coincide
