#pragma once

#include <cstdint>

namespace ckgen {

// splitmix64-seeded xoshiro-free generator: a thin wrapper around the
// SplitMix64 sequence. std::uniform_real_distribution is implementation
// defined, so selection strategies and model init draw through this to keep
// outputs identical across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [-a, a).
  double next_symmetric(double a) { return (2.0 * next_uniform() - 1.0) * a; }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace ckgen
