#ifndef LAST_RNG_HPP_
#define LAST_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace last {

//! Deterministic random source.
//!
//! Wraps std::mt19937_64 (whose output sequence is pinned by the standard)
//! and derives all distributions from raw 64-bit draws, so results are
//! reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  //! Uniform integer in [0, bound) via Lemire rejection. bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    while (true) {
      std::uint64_t x = next_u64();
      unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
      auto lo = static_cast<std::uint64_t>(m);
      if (lo >= bound || lo >= static_cast<std::uint64_t>(-bound) % bound) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  int below_int(int bound) { return static_cast<int>(below(static_cast<std::uint64_t>(bound))); }

  //! Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  //! Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  //! First k entries of a random permutation of {0, ..., n-1}.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k < 0 || n < 0 || k > n) {
      throw std::invalid_argument("Rng::sample_without_replacement: need 0 <= k <= n");
    }
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
  }

  //! Stream derivation: independent child seed for (seed, stream).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace last

#endif  // LAST_RNG_HPP_
