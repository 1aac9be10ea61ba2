#pragma once

// Seeded single-step and rollout experiments plus the paired sign test used
// to compare error distributions.

#include <cmath>
#include <cstdint>
#include <vector>

#include "tpla/mla/synthetic.hpp"
#include "tpla/numerics/orthogonal.hpp"
#include "tpla/pipeline/pd_pipeline.hpp"
#include "tpla/reparam/transform.hpp"
#include "tpla/shard/sharded.hpp"

namespace tpla::pipeline {

inline constexpr std::size_t kDefaultCalibrationRows = 256;

// Builds a transform of the requested kind for `model`. PCA is calibrated on
// fresh standard-normal inputs, never on the prompt it is later tested with.
inline reparam::OrthogonalTransform make_transform(reparam::TransformKind kind,
                                                   const mla::SyntheticModel& model, std::size_t g,
                                                   SeededRng& rng,
                                                   std::size_t calibration_rows = kDefaultCalibrationRows,
                                                   bool center = false) {
  const auto& cfg = model.cfg;
  switch (kind) {
    case reparam::TransformKind::identity: return reparam::identity_transform(cfg.latent_dim, g);
    case reparam::TransformKind::hadamard: return reparam::build_hadamard(cfg.latent_dim, g, rng);
    case reparam::TransformKind::pca: {
      const Matrix inputs = mla::random_inputs(rng, calibration_rows, cfg.hidden_dim);
      return reparam::build_pca(reparam::collect_calibration(cfg, model.weights, inputs, "synthetic"),
                                g, center);
    }
    case reparam::TransformKind::custom:
      return reparam::custom_transform(random_orthogonal(cfg.latent_dim, rng), g);
  }
  throw ConfigError("make_transform: unknown transform kind");
}

// First decode input after a prompt and its outputs.
inline Matrix first_decode_input(const mla::ModelConfig& cfg, const Matrix& prompt,
                                 const Matrix& prefill_out) {
  const Range last{prompt.rows() - 1, prompt.rows()};
  return next_input(cfg, row_slice(prompt, last), row_slice(prefill_out, last));
}

// One sharded decode step after an exact prefill of the prompt, against the
// absorbed-MLA step on the same cache. `w` is the weight set the shards are
// built from (reparameterized for tpla, original for gla).
inline double single_step_error(const mla::ModelConfig& cfg, const mla::WeightSet& w,
                                const reparam::OrthogonalTransform& t,
                                const shard::ShardPlan& plan, const Matrix& prompt,
                                shard::Exactness exactness) {
  const auto prefill = mla::mla_prefill(cfg, w, prompt);
  const Matrix x = first_decode_input(cfg, prompt, prefill.output);
  const auto aw = mla::absorb(cfg, w);
  const auto ref = mla::mla_decode_step(cfg, aw, w, x, prefill.cache);

  auto caches = cache_handoff(prefill.cache, t, plan);
  shard::StepOptions opt;
  opt.exactness = exactness;
  Matrix out;
  if (plan.mode == shard::ShardMode::gla) {
    const auto model = shard::shard_gla(cfg, w, plan);
    out = shard::gla_decode_step(model, x, std::move(caches), opt).output;
  } else {
    const auto model = shard::shard_tpla(cfg, w, plan, t);
    out = shard::tpla_decode_step(model, x, std::move(caches), opt).output;
  }
  return relative_l2(out, ref.output);
}

// One-sided sign test of "a tends to be smaller than b" over paired samples.
// Pairs with a == b count as half a win each way, rounded in favour of the
// null, so a tie never helps the claim.
struct SignTest {
  std::size_t n = 0;
  std::size_t wins = 0;             // a < b
  std::size_t ties = 0;
  std::size_t required = 0;         // wins needed at the given confidence
  double p_value = 1.0;             // P(X >= wins) under Binomial(n, 1/2)
  double median_a = 0.0;
  double median_b = 0.0;
  bool passed = false;
};

// P(X >= k) for X ~ Binomial(n, 1/2), summed in log space.
inline double binomial_upper_tail(std::size_t n, std::size_t k) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  double p = 0.0;
  const double ln2n = static_cast<double>(n) * std::log(2.0);
  for (std::size_t i = k; i <= n; ++i) {
    const double lc = std::lgamma(static_cast<double>(n) + 1.0) -
                      std::lgamma(static_cast<double>(i) + 1.0) -
                      std::lgamma(static_cast<double>(n - i) + 1.0);
    p += std::exp(lc - ln2n);
  }
  return std::min(p, 1.0);
}

inline std::size_t sign_test_threshold(std::size_t n, double confidence) {
  for (std::size_t k = 0; k <= n; ++k)
    if (binomial_upper_tail(n, k) <= 1.0 - confidence) return k;
  return n + 1;
}

inline SignTest paired_sign_test(const std::vector<double>& a, const std::vector<double>& b,
                                 double confidence = 0.95) {
  detail::require_shape(a.size() == b.size() && !a.empty(), "paired_sign_test: need equal, nonempty samples");
  SignTest s;
  s.n = a.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) ++s.wins;
    else if (a[i] == b[i]) ++s.ties;
  }
  s.wins += s.ties / 2;
  s.required = sign_test_threshold(s.n, confidence);
  s.p_value = binomial_upper_tail(s.n, s.wins);
  s.median_a = median(a);
  s.median_b = median(b);
  s.passed = s.wins >= s.required && s.median_a <= s.median_b;
  return s;
}

}  // namespace tpla::pipeline
