#pragma once

// Dense row-major matrix and the handful of deterministic kernels built on
// it. Every reduction accumulates in ascending index order so results are
// reproducible bit-for-bit across runs and platforms (given IEEE doubles and
// no FP contraction).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tpla/error.hpp"

namespace tpla {

template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;

  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    detail::require_shape(data_.size() == rows_ * cols_,
                          "matrix data length " + std::to_string(data_.size()) +
                              " != " + std::to_string(rows_) + "x" +
                              std::to_string(cols_));
  }

  static BasicMatrix from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    BasicMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      detail::require_shape(row.size() == c, "ragged initializer for matrix");
      std::copy(row.begin(), row.end(), m.row(i).begin());
      ++i;
    }
    return m;
  }

  static BasicMatrix row_vector(std::span<const T> values) {
    return BasicMatrix(1, values.size(), std::vector<T>(values.begin(), values.end()));
  }

  static BasicMatrix identity(std::size_t n) {
    BasicMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  static BasicMatrix diagonal(std::span<const T> d) {
    BasicMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  // Grows the matrix downwards; a 0x0 matrix adopts the column count.
  void append_rows(const BasicMatrix& other) {
    if (rows_ == 0 && cols_ == 0) cols_ = other.cols_;
    detail::require_shape(other.cols_ == cols_, "append_rows: column count mismatch");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    rows_ += other.rows_;
  }

  bool operator==(const BasicMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;
using MatrixF = BasicMatrix<float>;

// Half-open index range [begin, end).
struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const Range&) const = default;
};

template <typename T>
std::string shape_str(const BasicMatrix<T>& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// c[i][j] = sum_k a[i][k] * b[k][j], k ascending.
template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require_shape(a.cols() == b.rows(),
                        "matmul: " + shape_str(a) + " x " + shape_str(b));
  BasicMatrix<T> c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

// a * b^T without materializing the transpose.
template <typename T>
BasicMatrix<T> matmul_nt(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require_shape(a.cols() == b.cols(),
                        "matmul_nt: " + shape_str(a) + " x " + shape_str(b) + "^T");
  BasicMatrix<T> c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      T acc{};
      for (std::size_t k = 0; k < arow.size(); ++k) acc += arow[k] * brow[k];
      c(i, j) = acc;
    }
  }
  return c;
}

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& a) {
  BasicMatrix<T> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <typename T>
BasicMatrix<T> add(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(),
                        "add: " + shape_str(a) + " vs " + shape_str(b));
  BasicMatrix<T> c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += bd[i];
  return c;
}

template <typename T>
BasicMatrix<T> subtract(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(),
                        "subtract: " + shape_str(a) + " vs " + shape_str(b));
  BasicMatrix<T> c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

template <typename T>
BasicMatrix<T> scaled(BasicMatrix<T> a, T s) {
  for (auto& v : a.data()) v *= s;
  return a;
}

// Columns [r.begin, r.end).
template <typename T>
BasicMatrix<T> col_slice(const BasicMatrix<T>& a, Range r) {
  detail::require_shape(r.begin <= r.end && r.end <= a.cols(), "col_slice out of range");
  BasicMatrix<T> s(a.rows(), r.size());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto src = a.row(i);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(r.begin),
              src.begin() + static_cast<std::ptrdiff_t>(r.end), s.row(i).begin());
  }
  return s;
}

// Rows [r.begin, r.end).
template <typename T>
BasicMatrix<T> row_slice(const BasicMatrix<T>& a, Range r) {
  detail::require_shape(r.begin <= r.end && r.end <= a.rows(), "row_slice out of range");
  BasicMatrix<T> s(r.size(), a.cols());
  for (std::size_t i = r.begin; i < r.end; ++i)
    std::copy(a.row(i).begin(), a.row(i).end(), s.row(i - r.begin).begin());
  return s;
}

template <typename T>
BasicMatrix<T> hconcat(std::span<const BasicMatrix<T>> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    detail::require_shape(p.rows() == rows, "hconcat: row count mismatch");
    cols += p.cols();
  }
  BasicMatrix<T> out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    auto dst = out.row(i).begin();
    for (const auto& p : parts) dst = std::copy(p.row(i).begin(), p.row(i).end(), dst);
  }
  return out;
}

template <typename T>
BasicMatrix<T> vconcat(std::span<const BasicMatrix<T>> parts) {
  if (parts.empty()) return {};
  const std::size_t cols = parts.front().cols();
  std::vector<T> data;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    detail::require_shape(p.cols() == cols, "vconcat: column count mismatch");
    data.insert(data.end(), p.data().begin(), p.data().end());
    rows += p.rows();
  }
  return BasicMatrix<T>(rows, cols, std::move(data));
}

template <typename T>
void append_rows(BasicMatrix<T>& dst, const BasicMatrix<T>& rows) {
  dst.append_rows(rows);
}

template <typename T>
T max_abs(const BasicMatrix<T>& a) {
  T m{};
  for (T v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

template <typename T>
T max_abs_diff(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require_shape(a.rows() == b.rows() && a.cols() == b.cols(),
                        "max_abs_diff: " + shape_str(a) + " vs " + shape_str(b));
  T m{};
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

template <typename T>
T frobenius_norm(const BasicMatrix<T>& a) {
  T s{};
  for (T v : a.data()) s += v * v;
  return std::sqrt(s);
}

// ||a - ref||_F / ||ref||_F; falls back to the absolute norm when ref is zero.
template <typename T>
T relative_l2(const BasicMatrix<T>& a, const BasicMatrix<T>& ref) {
  const T diff = frobenius_norm(subtract(a, ref));
  const T base = frobenius_norm(ref);
  return base > T{} ? diff / base : diff;
}

template <typename T>
bool all_finite(const BasicMatrix<T>& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](T v) { return std::isfinite(v); });
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  detail::require_shape(a.size() == b.size(), "dot: length mismatch");
  T acc{};
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T squared_norm(std::span<const T> a) {
  T acc{};
  for (T v : a) acc += v * v;
  return acc;
}

// max |a a^T - I|.
template <typename T>
T orthogonality_defect(const BasicMatrix<T>& a) {
  detail::require_shape(a.rows() == a.cols(), "orthogonality_defect: non-square");
  const auto g = matmul_nt(a, a);
  T m{};
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      m = std::max(m, std::abs(g(i, j) - (i == j ? T{1} : T{})));
  return m;
}

template <typename U, typename T>
BasicMatrix<U> cast(const BasicMatrix<T>& a) {
  std::vector<U> d(a.size());
  auto src = a.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<U>(src[i]);
  return BasicMatrix<U>(a.rows(), a.cols(), std::move(d));
}

}  // namespace tpla
