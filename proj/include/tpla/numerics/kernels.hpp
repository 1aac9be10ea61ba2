#pragma once

// Row-wise normalization, rotary embedding and softmax.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tpla/numerics/matrix.hpp"

namespace tpla {

inline constexpr double kRopeBase = 10000.0;

// sqrt(mean(x^2) + eps)
template <typename T>
T rms(std::span<const T> x, T eps) {
  detail::require_shape(!x.empty(), "rms of an empty vector");
  detail::require(eps >= T{}, "rms: eps must be nonnegative");
  return std::sqrt(squared_norm(x) / static_cast<T>(x.size()) + eps);
}

template <typename T>
T rms(const std::vector<T>& x, T eps) {
  return rms(std::span<const T>(x), eps);
}

// Each row divided by its own RMS, then scaled elementwise by gamma.
// A zero row with eps == 0 stays zero.
template <typename T>
BasicMatrix<T> rmsnorm(std::span<const T> gamma, const BasicMatrix<T>& x, T eps) {
  detail::require_shape(gamma.size() == x.cols(), "rmsnorm: gamma length " +
                                                      std::to_string(gamma.size()) +
                                                      " != cols " + std::to_string(x.cols()));
  BasicMatrix<T> y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const T r = rms(x.row(i), eps);
    const T inv = r > T{} ? T{1} / r : T{};
    auto src = x.row(i);
    auto dst = y.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] * inv * gamma[j];
  }
  return y;
}

template <typename T>
BasicMatrix<T> rmsnorm(const std::vector<T>& gamma, const BasicMatrix<T>& x, T eps) {
  return rmsnorm(std::span<const T>(gamma), x, eps);
}

// theta_i = base^(-2i/d) for pair i of a d-dimensional rotary block.
inline double rope_frequency(std::size_t pair, std::size_t dim, double base = kRopeBase) {
  return std::pow(base, -2.0 * static_cast<double>(pair) / static_cast<double>(dim));
}

namespace detail {

template <typename T>
void rope_rotate(std::span<T> v, std::int64_t position, double base) {
  const std::size_t d = v.size();
  for (std::size_t i = 0; i < d / 2; ++i) {
    const double angle = static_cast<double>(position) * rope_frequency(i, d, base);
    const T c = static_cast<T>(std::cos(angle));
    const T s = static_cast<T>(std::sin(angle));
    const T x0 = v[2 * i];
    const T x1 = v[2 * i + 1];
    v[2 * i] = x0 * c - x1 * s;
    v[2 * i + 1] = x0 * s + x1 * c;
  }
}

}  // namespace detail

// Rotates consecutive pairs (2i, 2i+1) of row r by positions[r] * theta_i.
// `heads` > 1 treats each row as that many independent rotary blocks.
template <typename T>
BasicMatrix<T> rope_apply(const BasicMatrix<T>& x, std::span<const std::int64_t> positions,
                          std::size_t heads = 1, double base = kRopeBase) {
  detail::require_shape(positions.size() == x.rows(), "rope_apply: positions length " +
                                                          std::to_string(positions.size()) +
                                                          " != rows " +
                                                          std::to_string(x.rows()));
  detail::require_shape(heads >= 1 && x.cols() % heads == 0, "rope_apply: bad head split");
  const std::size_t d = x.cols() / heads;
  detail::require_shape(d % 2 == 0, "rope_apply: rotary dimension must be even");
  BasicMatrix<T> y = x;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t h = 0; h < heads; ++h)
      detail::rope_rotate(y.row(r).subspan(h * d, d), positions[r], base);
  return y;
}

template <typename T>
BasicMatrix<T> rope_apply(const BasicMatrix<T>& x, const std::vector<std::int64_t>& positions,
                          std::size_t heads = 1, double base = kRopeBase) {
  return rope_apply(x, std::span<const std::int64_t>(positions), heads, base);
}

// In-place max-shifted softmax over a row. -inf entries get weight 0; a row
// that is entirely -inf is a caller bug.
template <typename T>
void softmax_inplace(std::span<T> row) {
  T m = -std::numeric_limits<T>::infinity();
  for (T v : row) m = std::max(m, v);
  detail::require_shape(std::isfinite(m), "softmax over a fully masked row");
  T sum{};
  for (T& v : row) {
    v = std::exp(v - m);
    sum += v;
  }
  for (T& v : row) v /= sum;
}

template <typename T>
BasicMatrix<T> softmax_rows(BasicMatrix<T> x) {
  for (std::size_t i = 0; i < x.rows(); ++i) softmax_inplace(x.row(i));
  return x;
}

}  // namespace tpla
