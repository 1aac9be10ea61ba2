#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tpla/mla/config.hpp"
#include "tpla/numerics/matrix.hpp"
#include "tpla/numerics/rng.hpp"

namespace tpla::mla {

// Projection matrices of a latent-attention layer. Row-vector convention
// throughout: activations multiply weights from the left.
struct WeightSet {
  Matrix down_kv;   // W_DKV  [D x latent]
  Matrix up_k;      // W_UK   [latent x h_q*d_h]
  Matrix up_v;      // W_UV   [latent x h_q*d_h]
  Matrix down_q;    // W_DQ   [D x r_q]
  Matrix up_q;      // W_UQ   [r_q x h_q*d_h]
  Matrix q_rope;    // W_QR   [r_q x h_q*d_r]
  Matrix k_rope;    // W_KR   [D x d_r]
  Matrix out;       // W_O    [h_q*d_h x D]
  std::vector<double> gamma;  // latent RMSNorm scale [latent]

  // Set once gamma has been folded into up_k/up_v.
  bool gamma_folded = false;
  // Name of the orthogonal basis the latent axis lives in.
  std::string basis = "original";

  bool operator==(const WeightSet&) const = default;
};

inline void validate(const ModelConfig& cfg, const WeightSet& w) {
  auto check = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    detail::require_shape(m.rows() == r && m.cols() == c,
                          std::string(name) + " has shape " + shape_str(m) + ", expected " +
                              std::to_string(r) + "x" + std::to_string(c));
  };
  check(w.down_kv, cfg.hidden_dim, cfg.latent_dim, "W_DKV");
  check(w.up_k, cfg.latent_dim, cfg.q_width(), "W_UK");
  check(w.up_v, cfg.latent_dim, cfg.q_width(), "W_UV");
  check(w.down_q, cfg.hidden_dim, cfg.q_rank, "W_DQ");
  check(w.up_q, cfg.q_rank, cfg.q_width(), "W_UQ");
  check(w.q_rope, cfg.q_rank, cfg.rope_width(), "W_QR");
  check(w.k_rope, cfg.hidden_dim, cfg.rope_dim, "W_KR");
  check(w.out, cfg.q_width(), cfg.hidden_dim, "W_O");
  detail::require_shape(w.gamma.size() == cfg.latent_dim, "gamma length mismatch");
  for (double g : w.gamma) detail::require(std::isfinite(g), "gamma must be finite");
}

enum class GammaInit {
  ones,
  // 1 + U(-0.5, 0.5) per channel; exercises gamma folding.
  perturbed,
};

// Gaussian entries with std = scale / sqrt(fan_in), fan_in being the row
// count of each matrix. Matrices are drawn in declaration order.
inline WeightSet init_weights(const ModelConfig& cfg, SeededRng& rng, double scale = 1.0,
                              GammaInit gamma = GammaInit::ones) {
  cfg.validate();
  detail::require(scale > 0.0 && std::isfinite(scale), "init_weights: scale must be > 0");
  auto draw = [&](std::size_t rows, std::size_t cols) {
    return gaussian_matrix(rng, rows, cols, scale / std::sqrt(static_cast<double>(rows)));
  };
  WeightSet w;
  w.down_kv = draw(cfg.hidden_dim, cfg.latent_dim);
  w.up_k = draw(cfg.latent_dim, cfg.q_width());
  w.up_v = draw(cfg.latent_dim, cfg.q_width());
  w.down_q = draw(cfg.hidden_dim, cfg.q_rank);
  w.up_q = draw(cfg.q_rank, cfg.q_width());
  w.q_rope = draw(cfg.q_rank, cfg.rope_width());
  w.k_rope = draw(cfg.hidden_dim, cfg.rope_dim);
  w.out = draw(cfg.q_width(), cfg.hidden_dim);
  w.gamma.assign(cfg.latent_dim, 1.0);
  if (gamma == GammaInit::perturbed)
    for (double& g : w.gamma) g = 1.0 + rng.uniform(-0.5, 0.5);
  return w;
}

inline Matrix head_cols(const Matrix& m, std::size_t head, std::size_t width) {
  return col_slice(m, Range{head * width, (head + 1) * width});
}

inline Matrix head_rows(const Matrix& m, std::size_t head, std::size_t width) {
  return row_slice(m, Range{head * width, (head + 1) * width});
}

// Left-multiplies W_UK and W_UV by diag(gamma) and resets gamma to ones.
// Idempotent: already-folded weights come back unchanged.
inline WeightSet absorb_gamma(WeightSet w) {
  if (w.gamma_folded) return w;
  for (std::size_t i = 0; i < w.gamma.size(); ++i) {
    for (double& v : w.up_k.row(i)) v *= w.gamma[i];
    for (double& v : w.up_v.row(i)) v *= w.gamma[i];
  }
  w.gamma.assign(w.gamma.size(), 1.0);
  w.gamma_folded = true;
  return w;
}

}  // namespace tpla::mla
