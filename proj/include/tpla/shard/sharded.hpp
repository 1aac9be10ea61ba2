#pragma once

// Simulated tensor-parallel latent attention.
//
// Each device owns one latent slice (width d/g) and a contiguous range of
// heads. Per decode step a device
//   1. computes its slice of the new latent row and the replicated RoPE key,
//   2. normalizes its cached slice rows, using either the scaled local RMS
//      sqrt(alpha_j/d ||s||^2 + eps) or the global RMS shared through a
//      scalar all-reduce (exact_rms),
//   3. scores every local head against the slice: mu_j * Q_j s_hat^T, or the
//      all-reduced full product (exact_softmax), plus the replicated RoPE
//      logits, which are never scaled,
//   4. attends over the slice and projects through its W_VO rows.
// The device outputs are then summed by one all-reduce.
//
// GLA and TPLA share this kernel; they differ only in which heads a device
// holds and which slice constants it uses.

#include <cmath>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "tpla/mla/attention.hpp"
#include "tpla/reparam/transform.hpp"
#include "tpla/shard/collective.hpp"
#include "tpla/shard/plan.hpp"

namespace tpla::shard {

// Absorbed per-head weights plus the shared projections.
struct HeadWeights {
  std::vector<Matrix> query_latent;  // [r_q x latent]
  std::vector<Matrix> query_rope;    // [r_q x d_r]
  std::vector<Matrix> value_output;  // [latent x D]
  Matrix down_kv;                    // [D x latent]
  Matrix down_q;                     // [D x r_q]
  Matrix k_rope;                     // [D x d_r]
  std::vector<double> gamma;

  std::size_t num_heads() const { return query_latent.size(); }
};

inline HeadWeights head_weights(const mla::ModelConfig& cfg, const mla::WeightSet& w) {
  const mla::AbsorbedWeights aw = mla::absorb(cfg, w);
  HeadWeights hw;
  hw.query_latent = aw.query_latent;
  hw.value_output = aw.value_output;
  for (std::size_t h = 0; h < cfg.num_heads; ++h)
    hw.query_rope.push_back(mla::head_cols(w.q_rope, h, cfg.rope_dim));
  hw.down_kv = w.down_kv;
  hw.down_q = w.down_q;
  hw.k_rope = w.k_rope;
  hw.gamma = w.gamma;
  return hw;
}

struct DeviceShard {
  DeviceAssignment assignment;
  Matrix down_kv;  // W_DKV columns of this slice
  Matrix down_q;   // replicated
  Matrix k_rope;   // replicated
  std::vector<Matrix> query_latent;  // local heads, slice columns
  std::vector<Matrix> query_rope;    // local heads
  std::vector<Matrix> value_output;  // local heads, slice rows
  std::vector<double> gamma;         // slice of gamma
  double rms_scale = 1.0;
  double logit_scale = 1.0;
};

struct ShardedModel {
  mla::ModelConfig cfg;
  ShardPlan plan;
  std::vector<DeviceShard> shards;
  // Heads duplicated across groups so that member m of every group holds the
  // same logical heads; required for cross-group logit reduction under gla.
  bool duplicated_heads = false;
};

inline ShardedModel build_sharded(const mla::ModelConfig& cfg, const HeadWeights& hw,
                                  const ShardPlan& plan, const std::vector<double>& rms_scales,
                                  const std::vector<double>& logit_scales) {
  detail::require(plan.num_heads == hw.num_heads() && plan.latent_dim == cfg.latent_dim,
                  "build_sharded: plan does not match the model");
  detail::require(rms_scales.size() == plan.groups && logit_scales.size() == plan.groups,
                  "build_sharded: missing slice constants for some groups");
  ShardedModel model;
  model.cfg = cfg;
  model.plan = plan;
  for (const auto& a : plan.assignments) {
    DeviceShard s;
    s.assignment = a;
    s.down_kv = col_slice(hw.down_kv, a.latent);
    s.down_q = hw.down_q;
    s.k_rope = hw.k_rope;
    for (std::size_t h = a.heads.begin; h < a.heads.end; ++h) {
      s.query_latent.push_back(col_slice(hw.query_latent[h], a.latent));
      s.query_rope.push_back(hw.query_rope[h]);
      s.value_output.push_back(row_slice(hw.value_output[h], a.latent));
    }
    s.gamma.assign(hw.gamma.begin() + static_cast<std::ptrdiff_t>(a.latent.begin),
                   hw.gamma.begin() + static_cast<std::ptrdiff_t>(a.latent.end));
    s.rms_scale = rms_scales[a.group];
    s.logit_scale = logit_scales[a.group];
    model.shards.push_back(std::move(s));
  }
  return model;
}

// TPLA (or head-parallel MLA when g = 1) over weights already
// reparameterized with `t`; slice constants come from `t`.
inline ShardedModel shard_tpla(const mla::ModelConfig& cfg, const mla::WeightSet& w,
                               const ShardPlan& plan, const reparam::OrthogonalTransform& t) {
  detail::require(plan.mode == ShardMode::tpla || plan.mode == ShardMode::mla_heads,
                  "shard_tpla: plan mode is " + to_string(plan.mode));
  detail::require(t.group_count == plan.groups && t.rms_scale.size() == plan.groups &&
                      t.logit_scale.size() == plan.groups,
                  "shard_tpla: transform constants do not cover the plan's groups");
  detail::require_shape(t.dim() == cfg.latent_dim, "shard_tpla: transform width mismatch");
  return build_sharded(cfg, head_weights(cfg, w), plan, t.rms_scale, t.logit_scale);
}

// Literal GLA: each slice is normalized by its own RMS (alpha = g) and local
// logits are used as-is (mu = 1).
inline ShardedModel shard_gla(const mla::ModelConfig& cfg, const mla::WeightSet& w,
                              const ShardPlan& plan) {
  detail::require(plan.mode == ShardMode::gla, "shard_gla: plan mode is " + to_string(plan.mode));
  const std::vector<double> alpha(plan.groups, static_cast<double>(plan.groups));
  const std::vector<double> mu(plan.groups, 1.0);
  return build_sharded(cfg, head_weights(cfg, w), plan, alpha, mu);
}

// Device-local cache: latent columns of the slice plus a full RoPE-key replica.
struct DeviceCache {
  Matrix c_kv;
  Matrix k_pe;
  std::vector<std::int64_t> positions;
  // Squared norm of the full latent row, when known on this device.
  std::vector<std::optional<double>> global_sq_norm;

  std::size_t size() const { return positions.size(); }
};

inline std::vector<DeviceCache> empty_shard_caches(const ShardedModel& model) {
  std::vector<DeviceCache> caches(model.shards.size());
  for (std::size_t d = 0; d < caches.size(); ++d) {
    caches[d].c_kv = Matrix(0, model.shards[d].assignment.latent.size());
    caches[d].k_pe = Matrix(0, model.cfg.rope_dim);
  }
  return caches;
}

enum class ExecutionPolicy { sequential, threaded };

template <typename Fn>
void for_each_device(ExecutionPolicy policy, std::size_t n, Fn&& fn) {
  if (policy == ExecutionPolicy::sequential || n <= 1) {
    for (std::size_t d = 0; d < n; ++d) fn(d);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(n);
  for (std::size_t d = 0; d < n; ++d) workers.emplace_back([&fn, d] { fn(d); });
}

struct StepOptions {
  Exactness exactness = Exactness::sliced;
  // Rows that carry a known global norm (e.g. handed over from an exact
  // prefill) are normalized with it even in sliced mode.
  bool exact_known_rows = false;
  ExecutionPolicy policy = ExecutionPolicy::sequential;
  CollectiveLog* log = nullptr;
};

struct ShardedStep {
  Matrix output;  // [1 x D]
  std::vector<DeviceCache> caches;
};

namespace detail {

struct DeviceScratch {
  Matrix c_q;
  Matrix q_pe_raw;
  Matrix c_hat;
  std::vector<Matrix> partial;      // per local head [1 x S]
  std::vector<Matrix> rope_logits;  // per local head [1 x S]
  Matrix contribution;
};

inline ShardedStep sharded_step(const ShardedModel& model, const Matrix& x_t,
                                std::vector<DeviceCache> caches, const StepOptions& opt) {
  const auto& cfg = model.cfg;
  const auto& plan = model.plan;
  const std::size_t k = model.shards.size();
  ::tpla::detail::require_shape(x_t.rows() == 1 && x_t.cols() == cfg.hidden_dim,
                                "sharded step: expected a 1x" + std::to_string(cfg.hidden_dim) +
                                    " input, got " + shape_str(x_t));
  ::tpla::detail::require_shape(caches.size() == k, "sharded step: one cache per device required");
  const bool share_rms = exact_rms(opt.exactness) && plan.groups > 1;
  const bool share_logits = exact_softmax(opt.exactness) && plan.groups > 1;
  if (exact_softmax(opt.exactness) && plan.mode == ShardMode::gla && !model.duplicated_heads &&
      plan.groups > 1)
    throw ConfigError("gla: exact softmax needs the same heads in every group");

  const std::int64_t pos = caches.front().positions.empty() ? 0 : caches.front().positions.back() + 1;
  const std::vector<std::int64_t> p{pos};
  const double d_full = static_cast<double>(cfg.latent_dim);
  const double scale = cfg.logit_scale();
  std::vector<DeviceScratch> scratch(k);
  std::vector<double> new_sq(k, 0.0);

  // 1. local projections and cache append
  for_each_device(opt.policy, k, [&](std::size_t d) {
    const auto& s = model.shards[d];
    auto& c = caches[d];
    const Matrix slice = matmul(x_t, s.down_kv);
    new_sq[d] = squared_norm(slice.row(0));
    c.c_kv.append_rows(slice);
    c.k_pe.append_rows(rope_apply(matmul(x_t, s.k_rope), p));
    c.positions.push_back(pos);
    c.global_sq_norm.push_back(std::nullopt);
    scratch[d].c_q = matmul(x_t, s.down_q);
  });

  // 2. optional scalar all-reduce of the new row's squared norm across groups
  if (share_rms) {
    for (std::size_t m = 0; m < plan.group_size(); ++m) {
      std::vector<Matrix> parts;
      for (std::size_t j = 0; j < plan.groups; ++j)
        parts.emplace_back(1, 1, new_sq[j * plan.group_size() + m]);
      const double total = all_reduce_sum(parts, opt.log, "rms_norm")(0, 0);
      for (std::size_t j = 0; j < plan.groups; ++j)
        caches[j * plan.group_size() + m].global_sq_norm.back() = total;
    }
  } else if (plan.groups == 1) {
    for (std::size_t d = 0; d < k; ++d) caches[d].global_sq_norm.back() = new_sq[d];
  }

  // 3. normalization and local scores
  for_each_device(opt.policy, k, [&](std::size_t d) {
    const auto& s = model.shards[d];
    const auto& c = caches[d];
    auto& sc = scratch[d];
    sc.c_hat = Matrix(c.c_kv.rows(), c.c_kv.cols());
    for (std::size_t r = 0; r < c.c_kv.rows(); ++r) {
      const auto& known = c.global_sq_norm[r];
      double rms_r = 0.0;
      if (exact_rms(opt.exactness) || (opt.exact_known_rows && known)) {
        ::tpla::detail::require(known.has_value(),
                                "exact RMS requested but a cached row has no global norm");
        rms_r = std::sqrt(*known / d_full + cfg.eps);
      } else {
        rms_r = std::sqrt(s.rms_scale / d_full * squared_norm(c.c_kv.row(r)) + cfg.eps);
      }
      const double inv = rms_r > 0.0 ? 1.0 / rms_r : 0.0;
      for (std::size_t i = 0; i < c.c_kv.cols(); ++i)
        sc.c_hat(r, i) = c.c_kv(r, i) * inv * s.gamma[i];
    }
    for (std::size_t h = 0; h < s.query_latent.size(); ++h) {
      sc.partial.push_back(matmul_nt(matmul(sc.c_q, s.query_latent[h]), sc.c_hat));
      if (cfg.use_rope) {
        const Matrix q_pe = rope_apply(matmul(sc.c_q, s.query_rope[h]), p);
        sc.rope_logits.push_back(matmul_nt(q_pe, c.k_pe));
      }
    }
  });

  // 4. optional all-reduce of partial logits across groups, one per member
  // position with every local head stacked as a row.
  if (share_logits) {
    const std::size_t local_heads = model.shards.front().query_latent.size();
    for (std::size_t m = 0; m < plan.group_size(); ++m) {
      std::vector<Matrix> parts;
      for (std::size_t j = 0; j < plan.groups; ++j)
        parts.push_back(vconcat<double>(scratch[j * plan.group_size() + m].partial));
      const Matrix full = all_reduce_sum(parts, opt.log, "logits");
      for (std::size_t j = 0; j < plan.groups; ++j)
        for (std::size_t h = 0; h < local_heads; ++h)
          scratch[j * plan.group_size() + m].partial[h] = row_slice(full, Range{h, h + 1});
    }
  }

  // 5. softmax, attend, project
  for_each_device(opt.policy, k, [&](std::size_t d) {
    const auto& s = model.shards[d];
    auto& sc = scratch[d];
    const double mu = exact_softmax(opt.exactness) ? 1.0 : s.logit_scale;
    sc.contribution = Matrix(1, cfg.hidden_dim);
    for (std::size_t h = 0; h < s.query_latent.size(); ++h) {
      Matrix logits = sc.partial[h];
      for (std::size_t j = 0; j < logits.cols(); ++j) {
        const double rope = cfg.use_rope ? sc.rope_logits[h](0, j) : 0.0;
        logits(0, j) = (mu * logits(0, j) + rope) * scale;
      }
      const Matrix probs = softmax_rows(std::move(logits));
      sc.contribution = add(sc.contribution, matmul(matmul(probs, sc.c_hat), s.value_output[h]));
    }
  });

  std::vector<Matrix> parts;
  parts.reserve(k);
  for (auto& sc : scratch) parts.push_back(std::move(sc.contribution));
  Matrix out = all_reduce_sum(parts, opt.log, "output");
  return {std::move(out), std::move(caches)};
}

}  // namespace detail

inline ShardedStep gla_decode_step(const ShardedModel& model, const Matrix& x_t,
                                   std::vector<DeviceCache> caches, StepOptions opt = {}) {
  ::tpla::detail::require(model.plan.mode == ShardMode::gla,
                          "gla_decode_step: plan mode is " + to_string(model.plan.mode));
  return detail::sharded_step(model, x_t, std::move(caches), opt);
}

inline ShardedStep tpla_decode_step(const ShardedModel& model, const Matrix& x_t,
                                    std::vector<DeviceCache> caches, StepOptions opt = {}) {
  ::tpla::detail::require(
      model.plan.mode == ShardMode::tpla || model.plan.mode == ShardMode::mla_heads,
      "tpla_decode_step: plan mode is " + to_string(model.plan.mode));
  return detail::sharded_step(model, x_t, std::move(caches), opt);
}

// TPLA recast as GLA over a duplicated query: heads h_q..2h_q-1 copy heads
// 0..h_q-1, so under a two-group GLA split group 0 sees every original head
// on slice 0 and group 1 every original head on slice 1.
struct GlaView {
  mla::ModelConfig cfg;  // num_heads doubled
  ShardedModel model;    // mode gla
};

inline GlaView tpla_as_gla_view(const mla::ModelConfig& cfg, const mla::WeightSet& w,
                                const ShardPlan& plan, const reparam::OrthogonalTransform& t) {
  ::tpla::detail::require(plan.mode == ShardMode::tpla, "tpla_as_gla_view: needs a tpla plan");
  ::tpla::detail::require(plan.groups == 2, "tpla_as_gla_view: only g = 2 is supported (got g=" +
                                                std::to_string(plan.groups) + ")");
  ::tpla::detail::require(t.group_count == 2, "tpla_as_gla_view: transform must have 2 groups");
  HeadWeights hw = head_weights(cfg, w);
  const std::size_t h = hw.num_heads();
  for (std::size_t i = 0; i < h; ++i) {
    hw.query_latent.push_back(hw.query_latent[i]);
    hw.query_rope.push_back(hw.query_rope[i]);
    hw.value_output.push_back(hw.value_output[i]);
  }
  GlaView view;
  view.cfg = cfg;
  view.cfg.num_heads = 2 * h;
  const ShardPlan gla_plan = make_plan(view.cfg, plan.devices, 2, ShardMode::gla);
  view.model = build_sharded(view.cfg, hw, gla_plan, t.rms_scale, t.logit_scale);
  view.model.cfg = cfg;
  view.model.cfg.num_heads = 2 * h;
  view.model.duplicated_heads = true;
  return view;
}

}  // namespace tpla::shard
