#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fldp {

/// Derives an independent stream seed from a master seed and up to three
/// indices (splitmix64 chain). Used to give clients, runs and sampling
/// iterations their own reproducible substreams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s = mix(master);
  s = mix(s ^ mix(a + 1));
  s = mix(s ^ mix(b + 2));
  s = mix(s ^ mix(c + 3));
  return s;
}

/// Seeded random stream. All distributions are derived from the mt19937_64
/// output by explicit arithmetic (no std::*_distribution), so a given seed
/// produces the same values on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  /// Uniform on the open interval (0,1): midpoints of a 2^53 grid.
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool coin() { return uniform01() < 0.5; }

  /// Standard normal via Box-Muller (cosine branch); consumes two uniforms
  /// per draw so the stream layout is independent of call history.
  double normal01() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476 * u2);
  }

  /// Laplace(0, b) by inverse CDF from a single uniform draw.
  double laplace(double b) {
    const double u = uniform01() - 0.5;
    const double s = u < 0.0 ? -1.0 : 1.0;
    return -b * s * std::log(1.0 - 2.0 * std::abs(u));
  }

  /// Fisher-Yates shuffle driven by index().
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fldp
