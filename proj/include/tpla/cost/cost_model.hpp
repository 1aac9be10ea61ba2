#pragma once

// Static per-device cost model for one attention layer. 2 FLOPs per
// multiply-add. No queueing, launch overhead or overlap is modeled.

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "tpla/error.hpp"
#include "tpla/mla/config.hpp"

namespace tpla::cost {

enum class AttentionMode { mla, tpla, gqa };

inline std::string to_string(AttentionMode m) {
  switch (m) {
    case AttentionMode::mla: return "mla";
    case AttentionMode::tpla: return "tpla";
    case AttentionMode::gqa: return "gqa";
  }
  return "mla";
}

inline AttentionMode parse_attention_mode(const std::string& s) {
  if (s == "mla") return AttentionMode::mla;
  if (s == "tpla") return AttentionMode::tpla;
  if (s == "gqa") return AttentionMode::gqa;
  throw ConfigError("unknown attention mode '" + s + "'");
}

struct Hardware {
  double bandwidth = 3.35e12;  // bytes/s
  double flops = 989e12;       // FLOP/s
};

struct DeploymentSpec {
  mla::ModelConfig model = mla::dsv3_config();
  AttentionMode mode = AttentionMode::mla;
  std::uint64_t devices = 1;   // k
  std::uint64_t groups = 1;    // g (latent slices); 1 for mla
  std::uint64_t kv_heads = 8;  // gqa only
  std::uint64_t context = 32768;
  std::uint64_t query_len = 1;
  std::uint64_t batch = 1;
  std::uint64_t bytes_per_element = 2;
  Hardware hw{};

  void validate() const {
    detail::require(devices >= 1 && groups >= 1 && devices >= groups,
                    "DeploymentSpec: need k >= g >= 1");
    detail::require(devices % groups == 0, "DeploymentSpec: g must divide k");
    detail::require(context >= 1 && query_len >= 1 && batch >= 1 && bytes_per_element >= 1,
                    "DeploymentSpec: context, query length, batch and element size must be >= 1");
    detail::require(hw.bandwidth > 0.0 && hw.flops > 0.0,
                    "DeploymentSpec: bandwidth and compute must be positive");
    detail::require(model.latent_dim % groups == 0, "DeploymentSpec: g must divide the latent width");
    if (mode == AttentionMode::mla)
      detail::require(groups == 1, "DeploymentSpec: mla keeps the latent whole (g = 1)");
    if (mode == AttentionMode::gqa) {
      detail::require(kv_heads >= 1, "DeploymentSpec: gqa needs kv_heads >= 1");
      detail::require((2 * kv_heads * model.head_dim) % devices == 0,
                      "DeploymentSpec: k must divide the gqa KV width");
    } else {
      detail::require(model.num_heads % (devices / groups) == 0,
                      "DeploymentSpec: k/g must divide the head count");
    }
  }

  // Query heads processed by one device.
  std::uint64_t heads_per_device() const {
    if (mode == AttentionMode::gqa) return model.num_heads / devices;
    return model.num_heads / (devices / groups);
  }
  // Latent width held by one device.
  std::uint64_t latent_per_device() const { return model.latent_dim / groups; }
};

struct KvFootprint {
  std::uint64_t elements = 0;  // per token per device
  std::uint64_t bytes = 0;
};

// MLA replicates d_r + latent on every device, TPLA holds d_r + latent/g, and
// the GQA reference splits 2 * kv_heads * d_h over k devices.
inline KvFootprint kv_per_token(const DeploymentSpec& s) {
  s.validate();
  KvFootprint f;
  const std::uint64_t dr = s.model.use_rope ? s.model.rope_dim : 0;
  switch (s.mode) {
    case AttentionMode::mla: f.elements = dr + s.model.latent_dim; break;
    case AttentionMode::tpla: f.elements = dr + s.model.latent_dim / s.groups; break;
    case AttentionMode::gqa: f.elements = 2 * s.kv_heads * s.model.head_dim / s.devices; break;
  }
  f.bytes = f.elements * s.bytes_per_element;
  return f;
}

struct FlopCounts {
  std::uint64_t nope = 0;            // QK^T and PV over the latent
  std::uint64_t rope = 0;            // positional logits
  std::uint64_t kv_projection = 0;   // x W_DKV restricted to the local slice
  std::uint64_t q_projection = 0;    // c_q W_UQ for the local heads
  std::uint64_t out_projection = 0;  // latent outputs through W_VO
  std::uint64_t total() const { return nope + rope + kv_projection + q_projection + out_projection; }
};

// Per-device FLOPs for L_q new tokens against S_kv cached ones, times batch.
inline FlopCounts attention_flops(const DeploymentSpec& s) {
  s.validate();
  const std::uint64_t b = s.batch, lq = s.query_len, skv = s.context;
  const std::uint64_t hd = s.heads_per_device();
  const std::uint64_t hidden = s.model.hidden_dim;
  FlopCounts f;
  if (s.mode == AttentionMode::gqa) {
    const std::uint64_t dh = s.model.head_dim;
    const std::uint64_t kv_dev = 2 * s.kv_heads * dh / s.devices;
    f.nope = 2 * 2 * b * lq * skv * hd * dh;
    f.kv_projection = 2 * b * lq * hidden * kv_dev;
    f.q_projection = 2 * b * lq * hidden * hd * dh;
    f.out_projection = 2 * b * lq * hd * dh * hidden;
    return f;
  }
  const std::uint64_t lat = s.latent_per_device();
  const std::uint64_t dr = s.model.use_rope ? s.model.rope_dim : 0;
  f.nope = 2 * 2 * b * lq * skv * hd * lat;
  f.rope = 2 * b * lq * skv * hd * dr;
  f.kv_projection = 2 * b * lq * hidden * lat;
  f.q_projection = 2 * b * lq * hidden * hd * s.model.head_dim;
  f.out_projection = 2 * b * lq * hd * lat * hidden;
  return f;
}

struct CostReport {
  DeploymentSpec spec;
  KvFootprint kv;
  FlopCounts flops;
  std::uint64_t kv_bytes_per_step = 0;         // cache bytes read per decode step per device
  std::uint64_t collective_bytes_per_step = 0;  // output all-reduce payload per device
  double arithmetic_intensity = 0.0;            // FLOPs per cache byte for the query block
  double balance_point = 0.0;                   // hardware FLOPs per byte
  bool memory_bound = true;
  double memory_time = 0.0;
  double compute_time = 0.0;
};

inline CostReport analyze(const DeploymentSpec& s) {
  CostReport r;
  r.spec = s;
  r.kv = kv_per_token(s);
  r.flops = attention_flops(s);
  r.kv_bytes_per_step = s.batch * s.context * r.kv.bytes;
  r.collective_bytes_per_step = s.devices > 1
                                    ? s.batch * s.query_len * s.model.hidden_dim * s.bytes_per_element
                                    : 0;
  const double flop = static_cast<double>(r.flops.nope + r.flops.rope);
  r.arithmetic_intensity = flop / static_cast<double>(r.kv_bytes_per_step);
  r.balance_point = s.hw.flops / s.hw.bandwidth;
  r.memory_bound = r.arithmetic_intensity < r.balance_point;
  r.memory_time = static_cast<double>(r.kv_bytes_per_step) / s.hw.bandwidth;
  r.compute_time = static_cast<double>(r.flops.total()) / s.hw.flops;
  return r;
}

struct RatioReport {
  CostReport a;
  CostReport b;
  double decode_throughput_ratio = 1.0;  // b over a, memory-bound: bytes_a / bytes_b
  double prefill_latency_ratio = 1.0;    // flops_a / flops_b
  std::string decode_regime;             // regime of spec b
};

// How much faster `b` runs than `a`.
inline RatioReport predict_ratios(const DeploymentSpec& a, const DeploymentSpec& b) {
  detail::require(a.hw.bandwidth == b.hw.bandwidth && a.hw.flops == b.hw.flops,
                  "predict_ratios: specs must share hardware parameters");
  RatioReport r;
  r.a = analyze(a);
  r.b = analyze(b);
  r.decode_throughput_ratio =
      static_cast<double>(r.a.kv.bytes) / static_cast<double>(r.b.kv.bytes);
  r.prefill_latency_ratio =
      static_cast<double>(r.a.flops.total()) / static_cast<double>(r.b.flops.total());
  r.decode_regime = r.b.memory_bound ? "memory" : "compute";
  return r;
}

inline std::string format_table(const std::vector<std::pair<std::string, CostReport>>& rows) {
  const std::vector<std::string> head{"name",       "mode",      "k",         "g",
                                      "kv/token",   "kv bytes",  "nope flops", "rope flops",
                                      "total flops", "AI",       "bound"};
  std::vector<std::vector<std::string>> cells{head};
  for (const auto& [name, r] : rows) {
    std::ostringstream ai;
    ai.precision(4);
    ai << r.arithmetic_intensity;
    cells.push_back({name, to_string(r.spec.mode), std::to_string(r.spec.devices),
                     std::to_string(r.spec.groups), std::to_string(r.kv.elements),
                     std::to_string(r.kv.bytes), std::to_string(r.flops.nope),
                     std::to_string(r.flops.rope), std::to_string(r.flops.total()), ai.str(),
                     r.memory_bound ? "memory" : "compute"});
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << "  ";
      const std::string pad(width[c] - row[c].size(), ' ');
      os << (c == 0 ? row[c] + pad : pad + row[c]);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace tpla::cost
