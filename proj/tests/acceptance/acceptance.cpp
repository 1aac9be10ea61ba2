// Acceptance run: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "tpla/tpla.hpp"

using namespace tpla;
using reparam::TransformKind;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sign_str(const pipeline::SignTest& s) {
  return fmt("%zu/%zu wins (need %zu, p=%.2g, medians %.3g vs %.3g)", s.wins, s.n, s.required,
             s.p_value, s.median_a, s.median_b);
}

mla::SyntheticModel model_for(std::uint64_t seed) {
  return mla::make_synthetic_model(mla::toy_config(), seed);
}

// 1. Unsliced outputs are invariant under every transform kind.
Outcome reparameterization_invariance() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  const TransformKind kinds[] = {TransformKind::identity, TransformKind::hadamard, TransformKind::pca,
                                 TransformKind::custom};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    mla::SyntheticOptions so;
    so.gamma = mla::GammaInit::perturbed;
    const auto m = mla::make_synthetic_model(mla::toy_config(), 1000 + seed, so);
    const auto base = mla::mla_prefill(m.cfg, m.weights, m.prompt);
    const Matrix x = pipeline::first_decode_input(m.cfg, m.prompt, base.output);
    const auto base_step =
        mla::mla_decode_step(m.cfg, mla::absorb(m.cfg, m.weights), m.weights, x, base.cache);
    for (auto kind : kinds) {
      SeededRng rng(5000 + seed);
      const auto t = pipeline::make_transform(kind, m, 2, rng);
      const auto w2 = reparam::apply_transform(m.weights, t);
      const auto re = mla::mla_prefill(m.cfg, w2, m.prompt);
      const auto step = mla::mla_decode_step(m.cfg, mla::absorb(m.cfg, w2), w2, x, re.cache);
      worst = std::max({worst, max_abs_diff(base.output, re.output), max_abs_diff(base_step.output, step.output)});
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 30.0,
          fmt("max abs diff %.3e over 100 seeds x 4 transforms (prefill + decode), %.1f s", worst, secs)};
}

// 2. exact_both TPLA equals absorbed MLA decode.
Outcome exact_mode_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::size_t k : {2u, 4u}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto m = model_for(2000 + seed);
      SeededRng rng(6000 + seed);
      const auto t = pipeline::make_transform(TransformKind::pca, m, 2, rng);
      const auto w = reparam::apply_transform(m.weights, t);
      const auto plan = shard::make_plan(m.cfg, k, 2, shard::ShardMode::tpla);
      const auto prefill = mla::mla_prefill(m.cfg, w, m.prompt);
      const Matrix x = pipeline::first_decode_input(m.cfg, m.prompt, prefill.output);
      const auto ref = mla::mla_decode_step(m.cfg, mla::absorb(m.cfg, w), w, x, prefill.cache);
      shard::StepOptions opt;
      opt.exactness = shard::Exactness::exact_both;
      const auto out = shard::tpla_decode_step(shard::shard_tpla(m.cfg, w, plan, t), x,
                                               pipeline::cache_handoff(prefill.cache, t, plan), opt);
      worst = std::max(worst, max_abs_diff(out.output, ref.output));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 60.0,
          fmt("max abs diff %.3e over 100 seeds x plans (2,2),(4,2), %.1f s", worst, secs)};
}

// 3. Duplicated-head GLA view reproduces sliced TPLA bit for bit.
Outcome gla_view_equivalence() {
  std::size_t mismatches = 0, cases = 0;
  for (std::size_t k : {2u, 4u}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto m = model_for(3000 + seed);
      SeededRng rng(7000 + seed);
      const auto t = pipeline::make_transform(TransformKind::pca, m, 2, rng);
      const auto w = reparam::apply_transform(m.weights, t);
      const auto plan = shard::make_plan(m.cfg, k, 2, shard::ShardMode::tpla);
      const auto prefill = mla::mla_prefill(m.cfg, w, m.prompt);
      const Matrix x = pipeline::first_decode_input(m.cfg, m.prompt, prefill.output);
      const auto caches = pipeline::cache_handoff(prefill.cache, t, plan);
      const auto tp = shard::tpla_decode_step(shard::shard_tpla(m.cfg, w, plan, t), x, caches);
      const auto view = shard::tpla_as_gla_view(m.cfg, w, plan, t);
      const auto gv = shard::gla_decode_step(view.model, x, caches);
      mismatches += gv.output == tp.output ? 0 : 1;
      ++cases;
    }
  }
  return {mismatches == 0, fmt("%zu/%zu seeds bitwise identical (k=2 and k=4, sliced mode)",
                               cases - mismatches, cases)};
}

// 4. Single-step error ordering across slicing modes on the original split.
Outcome slicing_error_ordering() {
  const std::size_t n = 200;
  std::vector<double> both_exact, rms_sliced, sm_sliced, both_sliced;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    const auto m = model_for(4000 + seed);
    const auto t = reparam::identity_transform(m.cfg.latent_dim, 2);
    const auto plan = shard::make_plan(m.cfg, 2, 2, shard::ShardMode::tpla);
    auto err = [&](shard::Exactness e) {
      return pipeline::single_step_error(m.cfg, m.weights, t, plan, m.prompt, e);
    };
    both_exact.push_back(err(shard::Exactness::exact_both));
    rms_sliced.push_back(err(shard::Exactness::exact_softmax));
    sm_sliced.push_back(err(shard::Exactness::exact_rms));
    both_sliced.push_back(err(shard::Exactness::sliced));
  }
  const double exact_med = pipeline::median(both_exact);
  const auto a = pipeline::paired_sign_test(both_exact, rms_sliced);
  const auto b = pipeline::paired_sign_test(rms_sliced, sm_sliced);
  const auto c = pipeline::paired_sign_test(sm_sliced, both_sliced);
  return {exact_med <= 1e-9 && a.passed && b.passed && c.passed,
          fmt("identity split, %zu seeds; exact median %.2e; rms-only<=sm-only %s; sm-only<=both %s", n,
              exact_med, sign_str(b).c_str(), sign_str(c).c_str())};
}

// 5. PCA beats the identity split with both slicings; Hadamard balances slice energy.
Outcome reparameterization_benefit() {
  const std::size_t n = 100;
  std::vector<double> pca_err, id_err, had_imb, id_imb;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    const auto m = model_for(5000 + seed);
    const auto plan = shard::make_plan(m.cfg, 2, 2, shard::ShardMode::tpla);
    SeededRng rng(8000 + seed);
    const auto pca = pipeline::make_transform(TransformKind::pca, m, 2, rng);
    const auto id = reparam::identity_transform(m.cfg.latent_dim, 2);
    pca_err.push_back(pipeline::single_step_error(m.cfg, reparam::apply_transform(m.weights, pca), pca, plan,
                                                  m.prompt, shard::Exactness::sliced));
    id_err.push_back(pipeline::single_step_error(m.cfg, m.weights, id, plan, m.prompt, shard::Exactness::sliced));

    const auto cal = reparam::collect_calibration(m.cfg, m.weights,
                                                  mla::random_inputs(rng, 256, m.cfg.hidden_dim), "held-out");
    const auto had = reparam::build_hadamard(m.cfg.latent_dim, 2, rng);
    had_imb.push_back(reparam::partition_energy(cal, had).mean_imbalance);
    id_imb.push_back(reparam::partition_energy(cal, id).mean_imbalance);
  }
  const auto e = pipeline::paired_sign_test(pca_err, id_err);
  const auto h = pipeline::paired_sign_test(had_imb, id_imb);
  return {e.passed && e.median_a < e.median_b && h.passed,
          fmt("pca<identity error %s; hadamard<identity imbalance %s", sign_str(e).c_str(), sign_str(h).c_str())};
}

// 6. GLA on generic weights degrades more than sliced TPLA.
Outcome gla_degradation() {
  const std::size_t n = 100;
  std::vector<double> tpla_err, gla_err;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    const auto m = model_for(6000 + seed);
    SeededRng rng(9000 + seed);
    const auto pca = pipeline::make_transform(TransformKind::pca, m, 2, rng);
    const auto tplan = shard::make_plan(m.cfg, 2, 2, shard::ShardMode::tpla);
    const auto gplan = shard::make_plan(m.cfg, 2, 2, shard::ShardMode::gla);
    tpla_err.push_back(pipeline::single_step_error(m.cfg, reparam::apply_transform(m.weights, pca), pca, tplan,
                                                   m.prompt, shard::Exactness::sliced));
    gla_err.push_back(pipeline::single_step_error(m.cfg, m.weights,
                                                  reparam::identity_transform(m.cfg.latent_dim, 2), gplan,
                                                  m.prompt, shard::Exactness::sliced));
  }
  const auto s = pipeline::paired_sign_test(tpla_err, gla_err);
  return {s.passed && s.median_a < s.median_b, fmt("tpla<gla %s", sign_str(s).c_str())};
}

// 7. PD separation: rollout divergence no worse than full TPLA; prefill untouched.
Outcome pd_separation() {
  const std::size_t n = 100, steps = 16;
  std::vector<double> pd, full;
  std::size_t prefill_mismatch = 0;
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    const auto m = model_for(7000 + seed);
    SeededRng rng(10000 + seed);
    const auto t = pipeline::make_transform(TransformKind::pca, m, 2, rng);
    const auto w = reparam::apply_transform(m.weights, t);
    const auto plan = shard::make_plan(m.cfg, 2, 2, shard::ShardMode::tpla);
    const auto run = pipeline::compare_variants(m.cfg, w, t, plan, m.prompt, steps);
    pd.push_back(run.error(pipeline::Variant::tpla_pd_sep).decode_summary.median);
    full.push_back(run.error(pipeline::Variant::tpla_full).decode_summary.median);
    if (!(run.trace(pipeline::Variant::tpla_pd_sep).prefill_outputs ==
          run.trace(pipeline::Variant::mla_only).prefill_outputs))
      ++prefill_mismatch;
  }
  const double mpd = pipeline::median(pd), mfull = pipeline::median(full);
  const auto s = pipeline::paired_sign_test(pd, full);
  return {mpd <= mfull && prefill_mismatch == 0,
          fmt("%zu runs x %zu steps: median divergence pd_sep %.3e <= full %.3e (%zu/%zu paired wins); "
              "prefill bitwise mismatches %zu",
              n, steps, mpd, mfull, s.wins, s.n, prefill_mismatch)};
}

// 8. KV-cache dimension arithmetic and the decode byte ratio.
Outcome dimension_arithmetic() {
  cost::DeploymentSpec mla_s;
  mla_s.model = mla::dsv3_config();
  mla_s.mode = cost::AttentionMode::mla;
  mla_s.devices = 2;
  cost::DeploymentSpec tpla_s = mla_s;
  tpla_s.mode = cost::AttentionMode::tpla;
  tpla_s.groups = 2;
  cost::DeploymentSpec gqa = mla_s;
  gqa.mode = cost::AttentionMode::gqa;
  gqa.model.num_heads = 64;
  gqa.kv_heads = 8;
  gqa.devices = 1;
  const auto g1 = cost::kv_per_token(gqa).elements;
  gqa.devices = 4;
  const auto g4 = cost::kv_per_token(gqa).elements;
  const auto m = cost::kv_per_token(mla_s).elements, t = cost::kv_per_token(tpla_s).elements;
  const double ratio = cost::predict_ratios(mla_s, tpla_s).decode_throughput_ratio;
  const double rel = std::abs(ratio - 1.79) / 1.79;
  const bool ok = m == 576 && t == 320 && g1 == 2048 && g4 == 512 && std::abs(ratio - 1.8) < 1e-12 && rel <= 0.006;
  return {ok, fmt("mla %llu, tpla(g=2) %llu, gqa %llu / %llu per token; ratio %.4f (%.2f%% from 1.79)",
                  static_cast<unsigned long long>(m), static_cast<unsigned long long>(t),
                  static_cast<unsigned long long>(g1), static_cast<unsigned long long>(g4), ratio, 100.0 * rel)};
}

// 9. NoPE FLOPs agree exactly between TPLA(g=2) and MLA(k=2).
Outcome flop_equivalence() {
  std::size_t cases = 0, equal = 0;
  for (std::uint64_t h : {16u, 64u, 128u})
    for (std::uint64_t dh : {64u, 128u, 256u})
      for (std::uint64_t skv : {512u, 8192u, 131072u}) {
        cost::DeploymentSpec a;
        a.model = mla::dsv3_config();
        a.model.num_heads = h;
        a.model.head_dim = dh;
        a.model.latent_dim = 4 * dh;
        a.context = skv;
        a.mode = cost::AttentionMode::mla;
        a.devices = 2;
        cost::DeploymentSpec b = a;
        b.mode = cost::AttentionMode::tpla;
        b.groups = 2;
        const auto fa = cost::attention_flops(a).nope, fb = cost::attention_flops(b).nope;
        // Independent count: MLA keeps h/2 heads over the full latent, TPLA all h over half of it.
        const std::uint64_t oracle = 2 * 2 * skv * (h / 2) * (4 * dh);
        equal += (fa == fb && fa == oracle) ? 1 : 0;
        ++cases;
      }
  return {cases >= 27 && equal == cases, fmt("%zu/%zu grid points equal", equal, cases)};
}

// 10. Hadamard worked examples.
Outcome hadamard_examples() {
  SeededRng rng(0);
  const auto t = reparam::build_hadamard(4, 2, rng, false);
  const Matrix spread = matmul(Matrix::from_rows({{100, 0, 0, 0}}), t.u);
  bool ok = true;
  for (std::size_t j = 0; j < 4; ++j) ok = ok && spread(0, j) == 50.0;
  ok = ok && max_abs_diff(t.u, oracle::hadamard(4)) == 0.0;
  const std::vector<double> q{100, 0, 0, 0}, c{0, 0, 80, 0};
  const auto parts = reparam::partial_logits(q, c, t);
  ok = ok && parts.size() == 2 && parts[0] == -parts[1] && parts[0] != 0.0 && parts[0] + parts[1] == 0.0;
  return {ok, fmt("(100,0,0,0)U = (%g,%g,%g,%g); half-sums %g and %g, total %g", spread(0, 0), spread(0, 1),
                  spread(0, 2), spread(0, 3), parts[0], parts[1], parts[0] + parts[1])};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"reparameterization invariance", reparameterization_invariance},
      {"exact-mode tpla equals mla", exact_mode_equivalence},
      {"tpla-as-gla view bitwise", gla_view_equivalence},
      {"slicing error ordering", slicing_error_ordering},
      {"reparameterization benefit", reparameterization_benefit},
      {"gla degradation direction", gla_degradation},
      {"pd separation benefit", pd_separation},
      {"dimension arithmetic", dimension_arithmetic},
      {"flop equivalence", flop_equivalence},
      {"hadamard worked examples", hadamard_examples},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.passed ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
