#pragma once

// Prefill/decode separation.
//
// Three variants run the same prompt and the same decode schedule:
//   mla_only     exact MLA prefill and absorbed-MLA decode (the oracle),
//   tpla_full    the prompt is pushed token by token through sliced TPLA,
//                then sliced TPLA decode,
//   tpla_pd_sep  exact MLA prefill on the reparameterized weights, its latent
//                cache sliced across devices, then sliced TPLA decode.
// All variants use the reparameterized weights, so mla_only and the pd_sep
// prefill are the same computation.
//
// Closed loop: the next input is RMSNorm(1, x_t + y_t), x_t being the current
// input and y_t the variant's own output. Teacher forcing feeds the oracle's
// inputs instead.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tpla/mla/attention.hpp"
#include "tpla/reparam/transform.hpp"
#include "tpla/shard/sharded.hpp"

namespace tpla::pipeline {

enum class Variant { mla_only, tpla_full, tpla_pd_sep };
enum class Feeding { autonomous, teacher_forced };
// How decode treats prefill rows handed over with their global norm.
enum class PrefillRowNorm { sliced, exact };

inline constexpr std::array<Variant, 3> kAllVariants{Variant::mla_only, Variant::tpla_full,
                                                     Variant::tpla_pd_sep};

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::mla_only: return "mla_only";
    case Variant::tpla_full: return "tpla_full";
    case Variant::tpla_pd_sep: return "tpla_pd_sep";
  }
  return "mla_only";
}

inline std::string to_string(Feeding f) {
  return f == Feeding::autonomous ? "autonomous" : "teacher_forced";
}

inline std::string to_string(PrefillRowNorm n) {
  return n == PrefillRowNorm::sliced ? "sliced" : "exact";
}

inline Feeding parse_feeding(const std::string& s) {
  if (s == "autonomous") return Feeding::autonomous;
  if (s == "teacher_forced") return Feeding::teacher_forced;
  throw ConfigError("unknown feeding mode '" + s + "'");
}

inline PrefillRowNorm parse_prefill_row_norm(const std::string& s) {
  if (s == "sliced") return PrefillRowNorm::sliced;
  if (s == "exact") return PrefillRowNorm::exact;
  throw ConfigError("unknown prefill row normalization '" + s + "'");
}

struct PipelineOptions {
  shard::Exactness exactness = shard::Exactness::sliced;
  Feeding feeding = Feeding::autonomous;
  PrefillRowNorm prefill_rows = PrefillRowNorm::sliced;
  shard::ExecutionPolicy policy = shard::ExecutionPolicy::sequential;
};

struct VariantTrace {
  Variant variant = Variant::mla_only;
  Matrix prefill_outputs;  // [L_p x D]
  Matrix decode_inputs;    // [T x D]
  Matrix decode_outputs;   // [T x D]
};

inline Matrix next_input(const mla::ModelConfig& cfg, const Matrix& x, const Matrix& y) {
  const std::vector<double> ones(cfg.hidden_dim, 1.0);
  return rmsnorm(ones, add(x, y), cfg.eps);
}

// Splits a full latent cache by the plan's slices; RoPE keys are replicated
// and every row keeps its full squared norm. Nothing is recomputed.
inline std::vector<shard::DeviceCache> cache_handoff(const mla::LatentCache& cache,
                                                     const reparam::OrthogonalTransform& t,
                                                     const shard::ShardPlan& plan) {
  detail::require_shape(t.dim() == plan.latent_dim && cache.c_kv.cols() == plan.latent_dim,
                        "cache_handoff: transform width " + std::to_string(t.dim()) +
                            ", plan width " + std::to_string(plan.latent_dim) +
                            ", cache width " + std::to_string(cache.c_kv.cols()));
  detail::require(t.group_count == plan.groups, "cache_handoff: transform/plan group mismatch");
  std::vector<std::optional<double>> norms(cache.size());
  for (std::size_t r = 0; r < cache.size(); ++r) norms[r] = squared_norm(cache.c_kv.row(r));
  std::vector<shard::DeviceCache> out;
  out.reserve(plan.devices);
  for (const auto& a : plan.assignments) {
    shard::DeviceCache c;
    c.c_kv = col_slice(cache.c_kv, a.latent);
    c.k_pe = cache.k_pe;
    c.positions = cache.positions;
    c.global_sq_norm = norms;
    out.push_back(std::move(c));
  }
  return out;
}

// Reassembles device slices (one device per group) into a full cache.
inline mla::LatentCache gather_cache(const std::vector<shard::DeviceCache>& caches,
                                     const shard::ShardPlan& plan) {
  std::vector<Matrix> slices;
  for (const auto& a : plan.assignments)
    if (a.member == 0) slices.push_back(caches[a.device].c_kv);
  mla::LatentCache full;
  full.c_kv = hconcat<double>(slices);
  full.k_pe = caches.front().k_pe;
  full.positions = caches.front().positions;
  return full;
}

// Runs one variant. `w` must already be reparameterized with `t`.
// `forced_inputs` supplies decode inputs for teacher forcing.
inline VariantTrace run_pipeline(const mla::ModelConfig& cfg, const mla::WeightSet& w,
                                 const reparam::OrthogonalTransform& t,
                                 const shard::ShardPlan& plan, const Matrix& prompt,
                                 std::size_t steps, Variant variant,
                                 const PipelineOptions& opt = {},
                                 const Matrix* forced_inputs = nullptr) {
  detail::require(prompt.rows() >= 1, "run_pipeline: prompt must be nonempty");
  detail::require(steps >= 1, "run_pipeline: step count must be >= 1");
  detail::require_shape(prompt.cols() == cfg.hidden_dim, "run_pipeline: prompt width mismatch");
  if (opt.feeding == Feeding::teacher_forced)
    detail::require(forced_inputs != nullptr && forced_inputs->rows() >= steps,
                    "run_pipeline: teacher forcing needs the oracle's decode inputs");

  VariantTrace trace;
  trace.variant = variant;
  trace.decode_inputs = Matrix(steps, cfg.hidden_dim);
  trace.decode_outputs = Matrix(steps, cfg.hidden_dim);

  const Matrix last_prompt_row = row_slice(prompt, Range{prompt.rows() - 1, prompt.rows()});

  auto record_and_advance = [&](std::size_t step, const Matrix& x, const Matrix& y) {
    std::copy(x.data().begin(), x.data().end(), trace.decode_inputs.row(step).begin());
    std::copy(y.data().begin(), y.data().end(), trace.decode_outputs.row(step).begin());
    if (opt.feeding == Feeding::teacher_forced)
      return row_slice(*forced_inputs, Range{step + 1, std::min(step + 2, forced_inputs->rows())});
    return next_input(cfg, x, y);
  };
  auto first_input = [&]() {
    if (opt.feeding == Feeding::teacher_forced) return row_slice(*forced_inputs, Range{0, 1});
    const Matrix last_out =
        row_slice(trace.prefill_outputs, Range{prompt.rows() - 1, prompt.rows()});
    return next_input(cfg, last_prompt_row, last_out);
  };

  if (variant == Variant::mla_only) {
    auto prefill = mla::mla_prefill(cfg, w, prompt);
    trace.prefill_outputs = prefill.output;
    const auto aw = mla::absorb(cfg, w);
    mla::LatentCache cache = std::move(prefill.cache);
    Matrix x = first_input();
    for (std::size_t s = 0; s < steps; ++s) {
      auto r = mla::mla_decode_step(cfg, aw, w, x, std::move(cache));
      cache = std::move(r.cache);
      Matrix nx = record_and_advance(s, x, r.output);
      x = std::move(nx);
    }
    return trace;
  }

  const shard::ShardedModel model = shard::shard_tpla(cfg, w, plan, t);
  shard::StepOptions step_opt;
  step_opt.exactness = opt.exactness;
  step_opt.policy = opt.policy;
  std::vector<shard::DeviceCache> caches;

  if (variant == Variant::tpla_full) {
    caches = shard::empty_shard_caches(model);
    trace.prefill_outputs = Matrix(prompt.rows(), cfg.hidden_dim);
    for (std::size_t i = 0; i < prompt.rows(); ++i) {
      auto r = shard::tpla_decode_step(model, row_slice(prompt, Range{i, i + 1}),
                                       std::move(caches), step_opt);
      caches = std::move(r.caches);
      std::copy(r.output.data().begin(), r.output.data().end(),
                trace.prefill_outputs.row(i).begin());
    }
  } else {
    auto prefill = mla::mla_prefill(cfg, w, prompt);
    trace.prefill_outputs = prefill.output;
    caches = cache_handoff(prefill.cache, t, plan);
    step_opt.exact_known_rows = opt.prefill_rows == PrefillRowNorm::exact;
  }

  Matrix x = first_input();
  for (std::size_t s = 0; s < steps; ++s) {
    auto r = shard::tpla_decode_step(model, x, std::move(caches), step_opt);
    caches = std::move(r.caches);
    Matrix nx = record_and_advance(s, x, r.output);
    x = std::move(nx);
  }
  return trace;
}

struct ErrorSummary {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline ErrorSummary summarize(const std::vector<double>& v) {
  ErrorSummary s;
  if (v.empty()) return s;
  for (double e : v) {
    s.mean += e;
    s.max = std::max(s.max, e);
  }
  s.mean /= static_cast<double>(v.size());
  s.median = quantile(v, 0.5);
  s.p95 = quantile(v, 0.95);
  return s;
}

// Row-wise relative L2 error of `a` against `ref`.
inline std::vector<double> row_errors(const Matrix& a, const Matrix& ref) {
  detail::require_shape(a.rows() == ref.rows() && a.cols() == ref.cols(),
                        "row_errors: shape mismatch");
  std::vector<double> e(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    e[i] = relative_l2(row_slice(a, Range{i, i + 1}), row_slice(ref, Range{i, i + 1}));
  return e;
}

struct VariantErrors {
  std::vector<double> prefill;  // per prompt row
  std::vector<double> decode;   // per decode step
  ErrorSummary decode_summary;
};

struct PipelineRun {
  mla::ModelConfig cfg;
  reparam::TransformKind transform = reparam::TransformKind::identity;
  shard::ShardPlan plan;
  std::size_t prompt_len = 0;
  std::size_t steps = 0;
  PipelineOptions options;
  std::array<VariantTrace, 3> traces;
  std::array<VariantErrors, 3> errors;  // against mla_only

  const VariantTrace& trace(Variant v) const { return traces[static_cast<std::size_t>(v)]; }
  const VariantErrors& error(Variant v) const { return errors[static_cast<std::size_t>(v)]; }
};

// Runs all three variants and measures each against the oracle.
inline PipelineRun compare_variants(const mla::ModelConfig& cfg, const mla::WeightSet& w,
                                    const reparam::OrthogonalTransform& t,
                                    const shard::ShardPlan& plan, const Matrix& prompt,
                                    std::size_t steps, const PipelineOptions& opt = {}) {
  PipelineRun run;
  run.cfg = cfg;
  run.transform = t.kind;
  run.plan = plan;
  run.prompt_len = prompt.rows();
  run.steps = steps;
  run.options = opt;

  PipelineOptions oracle_opt = opt;
  oracle_opt.feeding = Feeding::autonomous;
  run.traces[0] = run_pipeline(cfg, w, t, plan, prompt, steps, Variant::mla_only, oracle_opt);
  const Matrix* forced = opt.feeding == Feeding::teacher_forced ? &run.traces[0].decode_inputs
                                                                : nullptr;
  run.traces[1] = run_pipeline(cfg, w, t, plan, prompt, steps, Variant::tpla_full, opt, forced);
  run.traces[2] = run_pipeline(cfg, w, t, plan, prompt, steps, Variant::tpla_pd_sep, opt, forced);

  for (std::size_t i = 0; i < 3; ++i) {
    auto& e = run.errors[i];
    e.prefill = row_errors(run.traces[i].prefill_outputs, run.traces[0].prefill_outputs);
    e.decode = row_errors(run.traces[i].decode_outputs, run.traces[0].decode_outputs);
    e.decode_summary = summarize(e.decode);
  }
  return run;
}

}  // namespace tpla::pipeline
