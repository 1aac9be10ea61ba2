#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "tpla/numerics/matrix.hpp"

namespace tpla {

// splitmix64 stream (Steele, Lea & Flood). State advances by the golden-ratio
// increment; each output is a bijective mix of the state, so identical seeds
// give identical streams on every platform. Gaussians come from Box-Muller,
// consuming two uniforms per pair and caching the second deviate.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 significant bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    return n == 0 ? 0 : static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

  double normal() noexcept {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  double sign() noexcept { return (next_u64() >> 63) != 0 ? -1.0 : 1.0; }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[below(i)]);
    return p;
  }

  // Derives an independent child seed; used to give sub-tasks their own streams.
  std::uint64_t fork() noexcept { return next_u64(); }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  std::optional<double> spare_;
};

inline Matrix gaussian_matrix(SeededRng& rng, std::size_t rows, std::size_t cols,
                              double stddev = 1.0) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.normal(0.0, stddev);
  return m;
}

}  // namespace tpla
