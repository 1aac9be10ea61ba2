// Runs a short rollout of each pipeline variant on the toy model and prints
// per-step errors together with the collective traffic of one sharded step.

#include <cstdio>

#include "tpla/tpla.hpp"

using namespace tpla;

int main() {
  const auto cfg = mla::toy_config();
  const auto model = mla::make_synthetic_model(cfg, 1);
  SeededRng rng(2);
  const auto t = pipeline::make_transform(reparam::TransformKind::pca, model, 2, rng);
  const auto w = reparam::apply_transform(model.weights, t);
  const auto plan = shard::make_plan(cfg, 2, 2, shard::ShardMode::tpla);

  const std::size_t steps = 8;
  const auto run = pipeline::compare_variants(cfg, w, t, plan, model.prompt, steps);
  std::printf("%-6s %14s %14s\n", "step", "tpla_full", "tpla_pd_sep");
  for (std::size_t s = 0; s < steps; ++s)
    std::printf("%-6zu %14.6e %14.6e\n", s, run.error(pipeline::Variant::tpla_full).decode[s],
                run.error(pipeline::Variant::tpla_pd_sep).decode[s]);

  shard::CollectiveLog log;
  shard::StepOptions opt;
  opt.log = &log;
  const auto prefill = mla::mla_prefill(cfg, w, model.prompt);
  const auto sharded = shard::shard_tpla(cfg, w, plan, t);
  const Matrix x = pipeline::first_decode_input(cfg, model.prompt, prefill.output);
  shard::tpla_decode_step(sharded, x, pipeline::cache_handoff(prefill.cache, t, plan), opt);
  std::printf("\ncollectives in one decode step:\n");
  for (const auto& r : log.records())
    std::printf("  %-10s %-12s parts=%zu elements=%zu\n",
                r.op == shard::CollectiveOp::all_reduce_sum ? "all_reduce" : "all_gather",
                r.purpose.c_str(), r.participants, r.elements_per_part);
  return 0;
}
