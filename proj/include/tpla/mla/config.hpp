#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "tpla/error.hpp"

namespace tpla::mla {

// Architectural dimensions of one latent-attention layer.
struct ModelConfig {
  std::size_t head_dim = 8;      // d_h
  std::size_t num_heads = 4;     // h_q
  std::size_t hidden_dim = 64;   // D
  std::size_t rope_dim = 4;      // d_r
  std::size_t q_rank = 16;       // r_q
  std::size_t latent_dim = 32;   // 4 * d_h by convention
  double eps = 1e-6;
  // false drops every RoPE term and uses 1/sqrt(d_h) as the logit scale.
  bool use_rope = true;

  // 1/sqrt(d_h + d_r) when RoPE logits participate, 1/sqrt(d_h) otherwise.
  double logit_scale() const {
    const double d = static_cast<double>(head_dim + (use_rope ? rope_dim : 0));
    return 1.0 / std::sqrt(d);
  }

  std::size_t q_width() const { return num_heads * head_dim; }
  std::size_t rope_width() const { return num_heads * rope_dim; }

  void validate() const {
    detail::require(head_dim >= 1 && num_heads >= 1 && hidden_dim >= 1 && q_rank >= 1 &&
                        latent_dim >= 1,
                    "model config: all dimensions must be >= 1");
    detail::require(rope_dim >= 1 && rope_dim % 2 == 0,
                    "model config: rope_dim must be a positive even number");
    detail::require(eps >= 0.0, "model config: eps must be nonnegative");
  }

  bool operator==(const ModelConfig&) const = default;
};

// D=64, h_q=4, d_h=8, latent=32, d_r=4, r_q=16.
inline ModelConfig toy_config() { return ModelConfig{}; }

// DeepSeek-V3 attention dimensions (latent 512, RoPE 64, 128 heads of 128).
inline ModelConfig dsv3_config() {
  ModelConfig c;
  c.head_dim = 128;
  c.num_heads = 128;
  c.hidden_dim = 7168;
  c.rope_dim = 64;
  c.q_rank = 1536;
  c.latent_dim = 512;
  c.eps = 1e-6;
  return c;
}

inline ModelConfig preset_config(const std::string& name) {
  if (name == "toy") return toy_config();
  if (name == "dsv3-dims") return dsv3_config();
  throw ConfigError("unknown preset '" + name + "' (expected toy or dsv3-dims)");
}

}  // namespace tpla::mla
