#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace parznet {

/// Deterministic random stream: mt19937_64 with explicit conversions so
/// sequences are bit-identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the sine partner is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Fisher-Yates permutation of {0, ..., n-1}.
  template <typename Int>
  void permutation(Int n, std::vector<Int>& out) {
    out.resize(static_cast<std::size_t>(n));
    for (Int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
    for (Int i = n - 1; i > 0; --i) {
      const Int j = static_cast<Int>(next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(out[static_cast<std::size_t>(i)], out[static_cast<std::size_t>(j)]);
    }
  }

  /// Derives an independent stream, e.g. one per epoch or per data split.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 on the combined word
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace parznet
