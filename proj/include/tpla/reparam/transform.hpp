#pragma once

// Orthogonal reparameterization of the latent axis.
//
// An orthogonal U leaves the full (unsliced) layer unchanged once gamma is
// folded away:  RMSNorm(1, cU) U^T = RMSNorm(1, c)  and  Q c^T = (QU)(cU)^T.
// What U buys is how the latent energy distributes across the g contiguous
// slices of the transformed axis, which is what the sliced-RMSNorm and
// sliced-softmax approximations depend on.
//
// Slice constants. For slice j with energy fraction f_j = E||(cU)_j||^2 /
// E||c||^2 the RMS scale is alpha_j = 1/f_j, so that alpha_j ||(cU)_j||^2
// estimates ||c||^2 and the local RMS estimate is sqrt(alpha_j/d ||(cU)_j||^2
// + eps). Logit scales mu_j default to alpha_j.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tpla/mla/config.hpp"
#include "tpla/mla/weights.hpp"
#include "tpla/numerics/matrix.hpp"
#include "tpla/numerics/rng.hpp"
#include "tpla/numerics/symmetric_eig.hpp"

namespace tpla::reparam {

enum class TransformKind { identity, hadamard, pca, custom };

inline std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::hadamard: return "hadamard";
    case TransformKind::pca: return "pca";
    case TransformKind::custom: return "custom";
  }
  return "custom";
}

inline TransformKind parse_transform_kind(const std::string& s) {
  if (s == "identity") return TransformKind::identity;
  if (s == "hadamard") return TransformKind::hadamard;
  if (s == "pca") return TransformKind::pca;
  if (s == "custom") return TransformKind::custom;
  throw ConfigError("unknown transform kind '" + s + "'");
}

struct OrthogonalTransform {
  Matrix u;  // [d x d], applied as c -> c U
  TransformKind kind = TransformKind::identity;
  std::size_t group_count = 1;
  std::vector<double> energy_fractions;  // f_j per slice
  std::vector<double> rms_scale;         // alpha_j = 1 / f_j
  std::vector<double> logit_scale;       // mu_j
  std::vector<double> eigenvalues;       // PCA only, descending
  bool rank_deficient = false;

  std::size_t dim() const { return u.rows(); }
  std::size_t slice_width() const { return dim() / group_count; }
  Range slice(std::size_t j) const { return {j * slice_width(), (j + 1) * slice_width()}; }

  double alpha() const { return rms_scale.at(0); }
  double beta() const { return rms_scale.at(rms_scale.size() > 1 ? 1 : 0); }
  double mu() const { return logit_scale.at(0); }
  double nu() const { return logit_scale.at(logit_scale.size() > 1 ? 1 : 0); }

  void validate() const {
    ::tpla::detail::require_shape(u.rows() == u.cols(), "transform matrix must be square");
    ::tpla::detail::require(group_count >= 1 && dim() % group_count == 0,
                    "transform: group count must divide the latent width");
    ::tpla::detail::require(energy_fractions.size() == group_count && rms_scale.size() == group_count &&
                        logit_scale.size() == group_count,
                    "transform: slice constants missing for some groups");
  }
};

namespace detail {

inline void set_uniform_constants(OrthogonalTransform& t) {
  const double g = static_cast<double>(t.group_count);
  t.energy_fractions.assign(t.group_count, 1.0 / g);
  t.rms_scale.assign(t.group_count, g);
  t.logit_scale.assign(t.group_count, g);
}

inline void set_constants_from_fractions(OrthogonalTransform& t, std::vector<double> fractions) {
  t.energy_fractions = std::move(fractions);
  t.rms_scale.resize(t.group_count);
  for (std::size_t j = 0; j < t.group_count; ++j) {
    const double f = t.energy_fractions[j];
    if (f <= 0.0) t.rank_deficient = true;
    t.rms_scale[j] = f > 0.0 ? 1.0 / f : std::numeric_limits<double>::infinity();
  }
  t.logit_scale = t.rms_scale;
}

inline bool is_power_of_two(std::size_t d) { return d != 0 && (d & (d - 1)) == 0; }

}  // namespace detail

inline OrthogonalTransform identity_transform(std::size_t d, std::size_t g) {
  ::tpla::detail::require(g >= 1 && d % g == 0, "identity_transform: g must divide d");
  OrthogonalTransform t;
  t.u = Matrix::identity(d);
  t.kind = TransformKind::identity;
  t.group_count = g;
  detail::set_uniform_constants(t);
  return t;
}

// Unnormalized Sylvester matrix: H_1 = (1), H_2n = [[H_n, H_n], [H_n, -H_n]].
inline Matrix sylvester_hadamard(std::size_t d) {
  ::tpla::detail::require(detail::is_power_of_two(d),
                          "hadamard: dimension " + std::to_string(d) + " is not a power of two");
  Matrix h(1, 1, 1.0);
  for (std::size_t n = 1; n < d; n *= 2) {
    Matrix next(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        next(i, j) = h(i, j);
        next(i, j + n) = h(i, j);
        next(i + n, j) = h(i, j);
        next(i + n, j + n) = -h(i, j);
      }
    }
    h = std::move(next);
  }
  return h;
}

// U = S H_d / sqrt(d), with S a seeded random +-1 diagonal when
// randomize_signs is set (identity otherwise). S acts on the input side, so
// c U = (c S) H_d / sqrt(d): the signs change which channels get mixed
// constructively in each slice.
inline OrthogonalTransform build_hadamard(std::size_t d, std::size_t g, SeededRng& rng,
                                          bool randomize_signs = true) {
  ::tpla::detail::require(g >= 1 && d % g == 0, "build_hadamard: g must divide d");
  Matrix h = sylvester_hadamard(d);
  const double norm = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) {
    const double s = randomize_signs ? rng.sign() : 1.0;
    for (double& v : h.row(i)) v *= s * norm;
  }
  OrthogonalTransform t;
  t.u = std::move(h);
  t.kind = TransformKind::hadamard;
  t.group_count = g;
  detail::set_uniform_constants(t);
  return t;
}

// Wraps an arbitrary orthogonal matrix with uniform slice constants.
inline OrthogonalTransform custom_transform(Matrix u, std::size_t g) {
  ::tpla::detail::require_shape(u.rows() == u.cols(), "custom_transform: matrix must be square");
  ::tpla::detail::require(g >= 1 && u.rows() % g == 0, "custom_transform: g must divide d");
  OrthogonalTransform t;
  t.u = std::move(u);
  t.kind = TransformKind::custom;
  t.group_count = g;
  detail::set_uniform_constants(t);
  return t;
}

// Pre-normalization latents gathered from calibration inputs.
struct CalibrationSet {
  Matrix features;  // [(B*L) x latent]
  std::string source = "unspecified";
};

inline CalibrationSet collect_calibration(const mla::ModelConfig& cfg, const mla::WeightSet& w,
                                          const Matrix& inputs, std::string source) {
  mla::validate(cfg, w);
  return {matmul(inputs, w.down_kv), std::move(source)};
}

// Calibration rows +-sqrt(d * lambda_i) v_i for i = 1..d, where v_i are the
// columns of `basis`. The set is mean-free and its second-moment matrix is
// exactly V diag(lambda) V^T.
inline CalibrationSet spectrum_calibration(const std::vector<double>& eigenvalues,
                                           const Matrix& basis) {
  const std::size_t d = eigenvalues.size();
  ::tpla::detail::require(d >= 1, "spectrum_calibration: empty spectrum");
  ::tpla::detail::require_shape(basis.rows() == d && basis.cols() == d,
                                "spectrum_calibration: basis must be d x d");
  CalibrationSet cal;
  cal.features = Matrix(2 * d, d);
  for (std::size_t i = 0; i < d; ++i) {
    ::tpla::detail::require(eigenvalues[i] >= 0.0, "spectrum_calibration: negative eigenvalue");
    const double a = std::sqrt(static_cast<double>(d) * eigenvalues[i]);
    for (std::size_t k = 0; k < d; ++k) {
      cal.features(2 * i, k) = a * basis(k, i);
      cal.features(2 * i + 1, k) = -a * basis(k, i);
    }
  }
  cal.source = "synthetic-spectrum";
  return cal;
}

// Second-moment matrix F^T F / n, or the covariance when `center` is set.
inline Matrix second_moment(const Matrix& f, bool center) {
  const std::size_t n = f.rows();
  Matrix x = f;
  if (center) {
    std::vector<double> mean(f.cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f.cols(); ++j) mean[j] += f(i, j);
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < f.cols(); ++j) x(i, j) -= mean[j];
  }
  Matrix m = scaled(matmul(transpose(x), x), 1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) m(j, i) = m(i, j);
  return m;
}

// Principal axes of the calibration latents, strongest first. Slice j of the
// transformed axis then holds components [j*d/g, (j+1)*d/g) and its energy
// fraction is the matching share of the eigenvalue sum.
inline OrthogonalTransform build_pca(const CalibrationSet& cal, std::size_t g,
                                     bool center = false) {
  const std::size_t d = cal.features.cols();
  ::tpla::detail::require(cal.features.rows() >= 1 && d >= 1, "build_pca: empty calibration set");
  ::tpla::detail::require(g >= 1 && d % g == 0, "build_pca: g must divide the latent width");
  ::tpla::detail::require(all_finite(cal.features), "build_pca: non-finite calibration features");

  const Matrix m = second_moment(cal.features, center);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += m(i, i);
  if (!(trace > 0.0)) throw ConfigError("build_pca: degenerate covariance (all-zero features)");

  const EigenDecomposition eig = symmetric_eig(m);
  OrthogonalTransform t;
  t.u = eig.vectors;
  t.kind = TransformKind::pca;
  t.group_count = g;
  t.eigenvalues = eig.values;
  t.rank_deficient = cal.features.rows() < d;

  std::vector<double> clamped(d);
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    clamped[i] = std::max(eig.values[i], 0.0);
    total += clamped[i];
  }
  if (eig.values.back() <= 1e-12 * eig.values.front()) t.rank_deficient = true;

  std::vector<double> fractions(g, 0.0);
  const std::size_t w = d / g;
  for (std::size_t j = 0; j < g; ++j)
    for (std::size_t i = j * w; i < (j + 1) * w; ++i) fractions[j] += clamped[i];
  for (double& f : fractions) f /= total;
  detail::set_constants_from_fractions(t, std::move(fractions));
  return t;
}

// W_DKV <- W_DKV U and W_UK, W_UV <- U^T W_{UK,UV}, after folding gamma.
inline mla::WeightSet apply_transform(const mla::WeightSet& w, const OrthogonalTransform& t) {
  ::tpla::detail::require_shape(t.u.rows() == w.down_kv.cols() && t.u.cols() == t.u.rows(),
                                "apply_transform: transform is " + shape_str(t.u) +
                                    " but latent width is " + std::to_string(w.down_kv.cols()));
  mla::WeightSet out = mla::absorb_gamma(w);
  const Matrix ut = transpose(t.u);
  out.down_kv = matmul(out.down_kv, t.u);
  out.up_k = matmul(ut, out.up_k);
  out.up_v = matmul(ut, out.up_v);
  out.basis = to_string(t.kind);
  return out;
}

struct EnergyReport {
  std::vector<double> mean_fraction;   // mean over rows of ||slice_j||^2 / ||c||^2
  double mean_scaled_deviation = 0.0;  // mean over rows of max_j |alpha_j e_j - E| / E
  double max_scaled_deviation = 0.0;
  double mean_imbalance = 0.0;         // mean over rows of (max_j e_j - min_j e_j) / E
  double max_imbalance = 0.0;
  std::size_t rows_used = 0;           // rows with nonzero energy
};

inline std::vector<double> slice_energies(std::span<const double> c,
                                          const OrthogonalTransform& t) {
  const Matrix row = matmul(Matrix::row_vector(c), t.u);
  std::vector<double> e(t.group_count, 0.0);
  for (std::size_t j = 0; j < t.group_count; ++j) {
    const Range r = t.slice(j);
    for (std::size_t i = r.begin; i < r.end; ++i) e[j] += row(0, i) * row(0, i);
  }
  return e;
}

// Empirical check of the RMSNorm slicing condition on calibration rows.
inline EnergyReport partition_energy(const CalibrationSet& cal, const OrthogonalTransform& t) {
  t.validate();
  ::tpla::detail::require_shape(cal.features.cols() == t.dim(),
                                "partition_energy: calibration width != transform width");
  EnergyReport rep;
  rep.mean_fraction.assign(t.group_count, 0.0);
  for (std::size_t r = 0; r < cal.features.rows(); ++r) {
    const auto e = slice_energies(cal.features.row(r), t);
    const double total = std::accumulate(e.begin(), e.end(), 0.0);
    if (!(total > 0.0)) continue;
    double dev = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) {
      rep.mean_fraction[j] += e[j] / total;
      dev = std::max(dev, std::abs(t.rms_scale[j] * e[j] - total) / total);
    }
    const auto [lo, hi] = std::minmax_element(e.begin(), e.end());
    const double imb = (*hi - *lo) / total;
    rep.mean_scaled_deviation += dev;
    rep.max_scaled_deviation = std::max(rep.max_scaled_deviation, dev);
    rep.mean_imbalance += imb;
    rep.max_imbalance = std::max(rep.max_imbalance, imb);
    ++rep.rows_used;
  }
  if (rep.rows_used > 0) {
    const double n = static_cast<double>(rep.rows_used);
    for (double& f : rep.mean_fraction) f /= n;
    rep.mean_scaled_deviation /= n;
    rep.mean_imbalance /= n;
  }
  return rep;
}

// Per-slice partial inner products (qU)_j . (cU)_j; they sum to q . c.
inline std::vector<double> partial_logits(std::span<const double> q, std::span<const double> c,
                                          const OrthogonalTransform& t) {
  const Matrix qu = matmul(Matrix::row_vector(q), t.u);
  const Matrix cu = matmul(Matrix::row_vector(c), t.u);
  std::vector<double> parts(t.group_count, 0.0);
  for (std::size_t j = 0; j < t.group_count; ++j) {
    const Range r = t.slice(j);
    for (std::size_t i = r.begin; i < r.end; ++i) parts[j] += qu(0, i) * cu(0, i);
  }
  return parts;
}

// Least-squares logit scales: mu_j minimizes sum (mu_j p_j - q.c)^2 over all
// (query, key) pairs, p_j being the slice-j partial product. Queries and keys
// are given in the original latent basis.
inline OrthogonalTransform estimate_logit_scales(OrthogonalTransform t, const Matrix& queries,
                                                 const Matrix& keys) {
  t.validate();
  ::tpla::detail::require_shape(queries.cols() == t.dim() && keys.cols() == t.dim(),
                                "estimate_logit_scales: width mismatch");
  const Matrix qu = matmul(queries, t.u);
  const Matrix ku = matmul(keys, t.u);
  std::vector<double> num(t.group_count, 0.0);
  std::vector<double> den(t.group_count, 0.0);
  for (std::size_t a = 0; a < qu.rows(); ++a) {
    for (std::size_t b = 0; b < ku.rows(); ++b) {
      std::vector<double> parts(t.group_count, 0.0);
      for (std::size_t j = 0; j < t.group_count; ++j) {
        const Range r = t.slice(j);
        for (std::size_t i = r.begin; i < r.end; ++i) parts[j] += qu(a, i) * ku(b, i);
      }
      const double full = std::accumulate(parts.begin(), parts.end(), 0.0);
      for (std::size_t j = 0; j < t.group_count; ++j) {
        num[j] += full * parts[j];
        den[j] += parts[j] * parts[j];
      }
    }
  }
  for (std::size_t j = 0; j < t.group_count; ++j)
    if (den[j] > 0.0) t.logit_scale[j] = num[j] / den[j];
  return t;
}

}  // namespace tpla::reparam
