#pragma once

#include <cmath>

#include "tpla/numerics/matrix.hpp"
#include "tpla/numerics/rng.hpp"

namespace tpla {

// Haar-distributed orthogonal matrix: Gram-Schmidt (run twice per column)
// on a Gaussian matrix, which fixes the sign so that R has a positive
// diagonal.
inline Matrix random_orthogonal(std::size_t n, SeededRng& rng) {
  Matrix g = gaussian_matrix(rng, n, n);
  Matrix q(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = g(i, j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += q(i, k) * col[i];
        for (std::size_t i = 0; i < n; ++i) col[i] -= proj * q(i, k);
      }
    }
    const double norm = std::sqrt(squared_norm<double>(col));
    detail::require_shape(norm > 0.0, "random_orthogonal: degenerate draw");
    for (std::size_t i = 0; i < n; ++i) q(i, j) = col[i] / norm;
  }
  return q;
}

}  // namespace tpla
