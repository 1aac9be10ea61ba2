#pragma once

// Reference multi-head latent attention: the unabsorbed prefill pipeline,
// matrix absorption, and the absorbed single-token decode step. Everything
// sharded is checked against these.

#include <cstdint>
#include <limits>
#include <vector>

#include "tpla/mla/config.hpp"
#include "tpla/mla/weights.hpp"
#include "tpla/numerics/kernels.hpp"
#include "tpla/numerics/matrix.hpp"

namespace tpla::mla {

// Per-sequence latent KV state. c_kv holds pre-normalization latents; the
// RMSNorm is applied whenever the cache is read.
struct LatentCache {
  Matrix c_kv;  // [S x latent]
  Matrix k_pe;  // [S x d_r], RoPE already applied
  std::vector<std::int64_t> positions;

  std::size_t size() const { return positions.size(); }

  std::int64_t next_position() const { return positions.empty() ? 0 : positions.back() + 1; }

  void validate(const ModelConfig& cfg) const {
    detail::require_shape(c_kv.rows() == positions.size() && k_pe.rows() == positions.size(),
                          "latent cache: row counts disagree");
    if (!positions.empty()) {
      detail::require_shape(c_kv.cols() == cfg.latent_dim, "latent cache: c_kv width");
      detail::require_shape(k_pe.cols() == cfg.rope_dim, "latent cache: k_pe width");
    }
  }

  bool operator==(const LatentCache&) const = default;
};

inline LatentCache empty_cache(const ModelConfig& cfg) {
  LatentCache c;
  c.c_kv = Matrix(0, cfg.latent_dim);
  c.k_pe = Matrix(0, cfg.rope_dim);
  return c;
}

// W_UK folded into the query path and W_UV paired with W_O, per head.
struct AbsorbedWeights {
  std::vector<Matrix> query_latent;  // W_UQ_h * W_UK_h^T   [r_q x latent]
  std::vector<Matrix> value_output;  // W_UV_h * W_O_h      [latent x D]
  bool gamma_absorbed = false;
};

inline AbsorbedWeights absorb(const ModelConfig& cfg, const WeightSet& w) {
  validate(cfg, w);
  AbsorbedWeights aw;
  aw.gamma_absorbed = w.gamma_folded;
  aw.query_latent.reserve(cfg.num_heads);
  aw.value_output.reserve(cfg.num_heads);
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    aw.query_latent.push_back(matmul_nt(head_cols(w.up_q, h, cfg.head_dim),
                                        head_cols(w.up_k, h, cfg.head_dim)));
    aw.value_output.push_back(
        matmul(head_cols(w.up_v, h, cfg.head_dim), head_rows(w.out, h, cfg.head_dim)));
  }
  return aw;
}

// Absorbed weights are terminal; absorbing them again is a type error.
AbsorbedWeights absorb(const ModelConfig&, const AbsorbedWeights&) = delete;

struct PrefillResult {
  Matrix output;  // [L x D]
  LatentCache cache;
  // Per-head [L x L] attention probabilities, filled when requested.
  std::vector<Matrix> attention;
};

inline std::vector<std::int64_t> position_range(std::int64_t start, std::size_t n) {
  std::vector<std::int64_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = start + static_cast<std::int64_t>(i);
  return p;
}

// Full unabsorbed pipeline with causal masking:
//   c = X W_DKV, c_q = X W_DQ, c_hat = RMSNorm(gamma, c)
//   q = c_q W_UQ, k = c_hat W_UK, v = c_hat W_UV
//   q_pe = RoPE(c_q W_QR), k_pe = RoPE(X W_KR)
//   O_h = softmax((q_h k_h^T + q_pe_h k_pe^T) * scale) v_h,  out = O W_O
inline PrefillResult mla_prefill(const ModelConfig& cfg, const WeightSet& w, const Matrix& x,
                                 bool keep_attention = false, std::int64_t start_position = 0) {
  validate(cfg, w);
  detail::require_shape(x.cols() == cfg.hidden_dim,
                        "mla_prefill: input width " + std::to_string(x.cols()) +
                            " != hidden dim " + std::to_string(cfg.hidden_dim));
  const std::size_t len = x.rows();
  const auto positions = position_range(start_position, len);

  const Matrix c_kv = matmul(x, w.down_kv);
  const Matrix c_q = matmul(x, w.down_q);
  const Matrix c_hat = rmsnorm(w.gamma, c_kv, cfg.eps);
  const Matrix q = matmul(c_q, w.up_q);
  const Matrix k = matmul(c_hat, w.up_k);
  const Matrix v = matmul(c_hat, w.up_v);
  const Matrix q_pe = rope_apply(matmul(c_q, w.q_rope), positions, cfg.num_heads);
  const Matrix k_pe = rope_apply(matmul(x, w.k_rope), positions);

  const double scale = cfg.logit_scale();
  const double neg_inf = -std::numeric_limits<double>::infinity();

  Matrix heads_out(len, cfg.q_width());
  PrefillResult result;
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    const Matrix qh = head_cols(q, h, cfg.head_dim);
    const Matrix kh = head_cols(k, h, cfg.head_dim);
    const Matrix vh = head_cols(v, h, cfg.head_dim);
    Matrix logits = matmul_nt(qh, kh);
    if (cfg.use_rope) {
      const Matrix rope_logits = matmul_nt(head_cols(q_pe, h, cfg.rope_dim), k_pe);
      logits = add(logits, rope_logits);
    }
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < len; ++j) logits(i, j) = j <= i ? logits(i, j) * scale : neg_inf;
    const Matrix probs = softmax_rows(std::move(logits));
    const Matrix oh = matmul(probs, vh);
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t d = 0; d < cfg.head_dim; ++d) heads_out(i, h * cfg.head_dim + d) = oh(i, d);
    if (keep_attention) result.attention.push_back(probs);
  }
  result.output = matmul(heads_out, w.out);
  result.cache.c_kv = c_kv;
  result.cache.k_pe = k_pe;
  result.cache.positions = positions;
  return result;
}

// Absorbed per-head queries for one token: row h is c_q * W_UQ_h * W_UK_h^T.
inline Matrix absorbed_queries(const ModelConfig& cfg, const AbsorbedWeights& aw,
                               const Matrix& c_q) {
  Matrix q(cfg.num_heads, cfg.latent_dim);
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    const Matrix qh = matmul(c_q, aw.query_latent[h]);
    std::copy(qh.data().begin(), qh.data().end(), q.row(h).begin());
  }
  return q;
}

struct DecodeResult {
  Matrix output;  // [1 x D]
  LatentCache cache;
};

// One decode step in absorbed form. Appends the token's latent and RoPE key,
// then for every head attends directly over the normalized latents:
//   O_h = softmax((Q_h c_hat^T + q_pe_h k_pe^T) * scale) c_hat,
//   out = sum_h O_h W_VO_h.
inline DecodeResult mla_decode_step(const ModelConfig& cfg, const AbsorbedWeights& aw,
                                    const WeightSet& w, const Matrix& x_t, LatentCache cache) {
  validate(cfg, w);
  detail::require_shape(x_t.rows() == 1 && x_t.cols() == cfg.hidden_dim,
                        "mla_decode_step: expected a 1x" + std::to_string(cfg.hidden_dim) +
                            " input, got " + shape_str(x_t));
  detail::require_shape(aw.query_latent.size() == cfg.num_heads &&
                            aw.value_output.size() == cfg.num_heads,
                        "mla_decode_step: absorbed weights have the wrong head count");
  cache.validate(cfg);
  if (cache.c_kv.cols() == 0) cache = empty_cache(cfg);

  const std::int64_t pos = cache.next_position();
  const std::vector<std::int64_t> p{pos};
  cache.c_kv.append_rows(matmul(x_t, w.down_kv));
  cache.k_pe.append_rows(rope_apply(matmul(x_t, w.k_rope), p));
  cache.positions.push_back(pos);

  const Matrix c_q = matmul(x_t, w.down_q);
  const Matrix q_pe = rope_apply(matmul(c_q, w.q_rope), p, cfg.num_heads);
  const Matrix c_hat = rmsnorm(w.gamma, cache.c_kv, cfg.eps);
  const Matrix queries = absorbed_queries(cfg, aw, c_q);
  const double scale = cfg.logit_scale();

  Matrix out(1, cfg.hidden_dim);
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    const Matrix qh = row_slice(queries, Range{h, h + 1});
    Matrix logits = matmul_nt(qh, c_hat);
    if (cfg.use_rope) logits = add(logits, matmul_nt(head_cols(q_pe, h, cfg.rope_dim), cache.k_pe));
    for (double& v : logits.data()) v *= scale;
    const Matrix probs = softmax_rows(std::move(logits));
    out = add(out, matmul(matmul(probs, c_hat), aw.value_output[h]));
  }
  return {std::move(out), std::move(cache)};
}

}  // namespace tpla::mla
