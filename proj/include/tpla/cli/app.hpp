#pragma once

// Command-line front end: verify, calibrate, simulate, cost.
//
// Exit codes: 0 success, 1 an invariant failed, 2 usage or config error.
// Reports are deterministic for a given (config, seed); no timestamps.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tpla/cost/cost_model.hpp"
#include "tpla/io/container.hpp"
#include "tpla/mla/attention.hpp"
#include "tpla/mla/synthetic.hpp"
#include "tpla/pipeline/experiment.hpp"
#include "tpla/pipeline/pd_pipeline.hpp"
#include "tpla/reparam/transform.hpp"
#include "tpla/shard/plan.hpp"
#include "tpla/shard/sharded.hpp"

namespace tpla::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 1;
inline constexpr int kExitUsage = 2;
inline constexpr const char* kOutDirEnv = "TPLA_OUT_DIR";

struct RunConfig {
  std::string subcommand;
  std::string config_path;
  std::string preset;  // empty: toy, or dsv3-dims for cost
  std::uint64_t seed = 0;
  std::string transform = "pca";
  std::string transform_file;
  std::size_t k = 2;
  std::size_t g = 2;
  std::string mode = "tpla";
  std::string exactness = "sliced";
  std::string out_dir;
  bool center = false;
  std::size_t steps = 16;
  std::size_t prompt_len = 8;
  std::string feeding = "autonomous";
  std::string prefill_rows = "sliced";
  std::string format = "json";
  std::string calibration_path;
  std::string synthetic_spec;
  std::size_t calibration_rows = pipeline::kDefaultCalibrationRows;
  std::size_t seeds = 10;
  double tolerance = 1e-9;
  std::string spec_path;
  std::size_t context = 32768;
  std::size_t query_len = 1;
  std::size_t prefill_len = 4096;
  std::size_t batch = 1;
  std::size_t bytes_per_element = 2;
  double bandwidth = 3.35e12;
  double flops = 989e12;
};

// Usage/config errors map to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline json read_json_file(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("config file '" + path + "' does not exist");
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// Resolves the model config: --config file (may name a preset), else --preset.
inline mla::ModelConfig resolve_model(const RunConfig& rc, const std::string& fallback = "toy") {
  const auto preset = mla::preset_config(rc.preset.empty() ? fallback : rc.preset);
  if (rc.config_path.empty()) return preset;
  json j = read_json_file(rc.config_path);
  if (j.contains("model")) j = j.at("model");
  return io::config_from_json(j, preset);
}

inline fs::path out_dir(const RunConfig& rc) {
  if (!rc.out_dir.empty()) return rc.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return ".";
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_report(const fs::path& path, const std::string& text) {
  io::write_file_atomic(path, text);
}

inline json transform_json(const reparam::OrthogonalTransform& t) {
  return {{"kind", reparam::to_string(t.kind)},
          {"group_count", t.group_count},
          {"energy_fractions", t.energy_fractions},
          {"alpha", t.rms_scale},
          {"mu", t.logit_scale},
          {"rank_deficient", t.rank_deficient},
          {"orthogonality_defect", orthogonality_defect(t.u)},
          {"content_hash", io::hex64(io::content_hash(io::to_container(t)))}};
}

inline std::vector<double> parse_spectrum(const std::string& spec) {
  std::vector<double> v;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double x = std::stod(item, &used);
      if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos)
        throw std::invalid_argument(item);
      v.push_back(x);
    } catch (const std::exception&) {
      throw UsageError("--synthetic expects comma-separated eigenvalues, got '" + spec + "'");
    }
  }
  if (v.empty()) throw UsageError("--synthetic spectrum is empty");
  return v;
}

// The transform used by verify/simulate: a file if given, else built.
inline reparam::OrthogonalTransform resolve_transform(const RunConfig& rc,
                                                      const mla::SyntheticModel& model,
                                                      SeededRng& rng) {
  if (!rc.transform_file.empty()) {
    if (!fs::exists(rc.transform_file))
      throw UsageError("transform file '" + rc.transform_file + "' does not exist");
    auto t = io::transform_from_container(io::load(rc.transform_file));
    t.validate();
    return t;
  }
  return pipeline::make_transform(reparam::parse_transform_kind(rc.transform), model, rc.g, rng,
                                  rc.calibration_rows, rc.center);
}

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

inline json checks_json(const std::vector<Check>& checks) {
  json arr = json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name},
                   {"value", c.value},
                   {"tolerance", c.tolerance},
                   {"passed", c.passed}});
  return arr;
}

inline json run_config_json(const RunConfig& rc, const mla::ModelConfig& cfg) {
  return {{"subcommand", rc.subcommand},
          {"preset", rc.preset.empty() ? "toy" : rc.preset},
          {"config_path", rc.config_path},
          {"model", io::config_to_json(cfg)},
          {"seed", rc.seed},
          {"transform", rc.transform_file.empty() ? rc.transform : "file"},
          {"k", rc.k},
          {"g", rc.g},
          {"mode", rc.mode},
          {"exactness", rc.exactness},
          {"center", rc.center}};
}

}  // namespace detail

// verify: equivalence invariants on seeded toy models.
inline int cmd_verify(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto cfg = detail::resolve_model(rc);
  const auto exactness = shard::parse_exactness(rc.exactness);
  const auto plan = shard::make_plan(cfg, rc.k, rc.g, shard::ShardMode::tpla);
  double reparam_diff = 0.0, exact_diff = 0.0, decode_diff = 0.0, gamma_diff = 0.0;
  double ortho = 0.0, view_diff = 0.0;
  bool view_ran = false;
  for (std::size_t s = 0; s < rc.seeds; ++s) {
    mla::SyntheticOptions so;
    so.gamma = mla::GammaInit::perturbed;
    const auto model = mla::make_synthetic_model(cfg, rc.seed + s, so);
    SeededRng rng(rc.seed + s + 0x9e3779b97f4a7c15ULL);
    const auto t = detail::resolve_transform(rc, model, rng);
    ortho = std::max(ortho, orthogonality_defect(t.u));

    const auto base = mla::mla_prefill(cfg, model.weights, model.prompt);
    const auto folded = mla::absorb_gamma(model.weights);
    gamma_diff = std::max(gamma_diff,
                          max_abs_diff(base.output, mla::mla_prefill(cfg, folded, model.prompt).output));
    const auto w2 = reparam::apply_transform(model.weights, t);
    const auto re = mla::mla_prefill(cfg, w2, model.prompt);
    reparam_diff = std::max(reparam_diff, max_abs_diff(base.output, re.output));

    // Step-by-step absorbed decode against prefill rows.
    const auto aw = mla::absorb(cfg, w2);
    auto cache = mla::empty_cache(cfg);
    for (std::size_t i = 0; i < model.prompt.rows(); ++i) {
      auto r = mla::mla_decode_step(cfg, aw, w2, row_slice(model.prompt, Range{i, i + 1}),
                                    std::move(cache));
      cache = std::move(r.cache);
      decode_diff = std::max(decode_diff,
                             max_abs_diff(r.output, row_slice(re.output, Range{i, i + 1})));
    }

    const Matrix x = pipeline::first_decode_input(cfg, model.prompt, re.output);
    const auto ref = mla::mla_decode_step(cfg, aw, w2, x, re.cache);
    const auto sharded = shard::shard_tpla(cfg, w2, plan, t);
    shard::StepOptions opt;
    opt.exactness = exactness;
    const auto caches = pipeline::cache_handoff(re.cache, t, plan);
    const auto tp = shard::tpla_decode_step(sharded, x, caches, opt);
    if (exactness == shard::Exactness::exact_both)
      exact_diff = std::max(exact_diff, max_abs_diff(tp.output, ref.output));
    if (plan.groups == 2) {
      view_ran = true;
      const auto view = shard::tpla_as_gla_view(cfg, w2, plan, t);
      const auto gv = shard::gla_decode_step(view.model, x, caches, opt);
      view_diff = std::max(view_diff, max_abs_diff(gv.output, tp.output));
    }
  }
  const double tol = rc.tolerance;
  std::vector<detail::Check> checks{
      {"transform_orthogonality", ortho, 1e-10, ortho <= 1e-10},
      {"gamma_absorption", gamma_diff, 1e-10, gamma_diff <= 1e-10},
      {"reparameterization_invariance", reparam_diff, tol, reparam_diff <= tol},
      {"decode_prefill_consistency", decode_diff, tol, decode_diff <= tol},
  };
  if (exactness == shard::Exactness::exact_both)
    checks.push_back({"exact_tpla_matches_mla", exact_diff, tol, exact_diff <= tol});
  if (view_ran) checks.push_back({"tpla_as_gla_view_bitwise", view_diff, 0.0, view_diff == 0.0});

  bool ok = true;
  for (const auto& c : checks) ok = ok && c.passed;
  json report;
  report["config"] = detail::run_config_json(rc, cfg);
  report["seeds"] = rc.seeds;
  report["checks"] = detail::checks_json(checks);
  report["passed"] = ok;
  const std::string text = detail::dump(report);
  if (!rc.out_dir.empty() || std::getenv(kOutDirEnv))
    detail::write_report(detail::out_dir(rc) / "verify.json", text);
  out << text;
  for (const auto& c : checks)
    if (!c.passed) err << "invariant failed: " << c.name << " = " << c.value << "\n";
  return ok ? kExitOk : kExitInvariant;
}

// calibrate: writes transform.bin and prints its constants.
inline int cmd_calibrate(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto kind = reparam::parse_transform_kind(rc.transform);
  reparam::OrthogonalTransform t;
  std::string source;
  if (!rc.synthetic_spec.empty()) {
    const auto spectrum = detail::parse_spectrum(rc.synthetic_spec);
    const std::size_t d = spectrum.size();
    SeededRng rng(rc.seed);
    const Matrix basis = Matrix::identity(d);
    const auto cal = reparam::spectrum_calibration(spectrum, basis);
    source = "synthetic:" + rc.synthetic_spec;
    switch (kind) {
      case reparam::TransformKind::identity: t = reparam::identity_transform(d, rc.g); break;
      case reparam::TransformKind::hadamard: t = reparam::build_hadamard(d, rc.g, rng); break;
      case reparam::TransformKind::pca: t = reparam::build_pca(cal, rc.g, rc.center); break;
      case reparam::TransformKind::custom: throw UsageError("calibrate cannot build custom transforms");
    }
  } else if (!rc.calibration_path.empty()) {
    if (!fs::exists(rc.calibration_path))
      throw UsageError("calibration file '" + rc.calibration_path + "' does not exist");
    const auto cal = io::calibration_from_container(io::load(rc.calibration_path));
    if (cal.features.rows() == 0 || cal.features.cols() == 0)
      throw UsageError("calibration file '" + rc.calibration_path + "' holds no rows");
    source = "file:" + fs::path(rc.calibration_path).filename().string();
    SeededRng rng(rc.seed);
    const std::size_t d = cal.features.cols();
    switch (kind) {
      case reparam::TransformKind::identity: t = reparam::identity_transform(d, rc.g); break;
      case reparam::TransformKind::hadamard: t = reparam::build_hadamard(d, rc.g, rng); break;
      case reparam::TransformKind::pca: t = reparam::build_pca(cal, rc.g, rc.center); break;
      case reparam::TransformKind::custom: throw UsageError("calibrate cannot build custom transforms");
    }
  } else {
    const auto cfg = detail::resolve_model(rc);
    const auto model = mla::make_synthetic_model(cfg, rc.seed);
    SeededRng rng(rc.seed + 0x9e3779b97f4a7c15ULL);
    source = "synthetic-model:" + (rc.preset.empty() ? std::string("toy") : rc.preset);
    t = pipeline::make_transform(kind, model, rc.g, rng, rc.calibration_rows, rc.center);
  }
  if (t.rank_deficient) err << "warning: calibration is rank-deficient; constants may be unreliable\n";

  auto container = io::to_container(t);
  container.meta["source"] = source;
  const fs::path path = detail::out_dir(rc) / "transform.bin";
  io::save(path, container);
  json report;
  report["source"] = source;
  report["seed"] = rc.seed;
  report["transform"] = detail::transform_json(t);
  report["file"] = path.filename().string();
  out << detail::dump(report);
  return kExitOk;
}

// simulate: three-variant pipeline run, JSON report and CSV error series.
inline int cmd_simulate(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  (void)err;
  if (rc.steps == 0) throw UsageError("--steps must be >= 1");
  if (rc.prompt_len == 0) throw UsageError("--prompt-len must be >= 1");
  const auto cfg = detail::resolve_model(rc);
  mla::SyntheticOptions so;
  so.prompt_len = rc.prompt_len;
  const auto model = mla::make_synthetic_model(cfg, rc.seed, so);
  SeededRng rng(rc.seed + 0x9e3779b97f4a7c15ULL);
  const auto t = detail::resolve_transform(rc, model, rng);
  const auto plan = shard::make_plan(cfg, rc.k, rc.g, shard::parse_shard_mode(rc.mode));
  if (plan.mode == shard::ShardMode::gla) throw UsageError("simulate runs tpla or mla_heads plans");
  pipeline::PipelineOptions opt;
  opt.exactness = shard::parse_exactness(rc.exactness);
  opt.feeding = pipeline::parse_feeding(rc.feeding);
  opt.prefill_rows = pipeline::parse_prefill_row_norm(rc.prefill_rows);
  const auto w2 = reparam::apply_transform(model.weights, t);
  const auto run = pipeline::compare_variants(cfg, w2, t, plan, model.prompt, rc.steps, opt);

  json report;
  report["config"] = detail::run_config_json(rc, cfg);
  report["config_hash"] = io::hex64(io::fnv1a(detail::run_config_json(rc, cfg).dump()));
  report["weights_hash"] = io::hex64(io::content_hash(io::to_container(w2)));
  report["transform"] = detail::transform_json(t);
  report["plan"] = io::plan_to_json(plan);
  report["prompt_len"] = run.prompt_len;
  report["steps"] = run.steps;
  report["feeding"] = pipeline::to_string(opt.feeding);
  report["prefill_rows"] = pipeline::to_string(opt.prefill_rows);
  json vars = json::object();
  for (auto v : pipeline::kAllVariants) {
    const auto& e = run.error(v);
    vars[pipeline::to_string(v)] = {{"prefill_max_error",
                                     e.prefill.empty() ? 0.0
                                                       : *std::max_element(e.prefill.begin(), e.prefill.end())},
                                    {"decode_errors", e.decode},
                                    {"mean", e.decode_summary.mean},
                                    {"median", e.decode_summary.median},
                                    {"p95", e.decode_summary.p95},
                                    {"max", e.decode_summary.max}};
  }
  report["variants"] = std::move(vars);
  report["scope"] = "relative L2 error of each variant's output against the MLA-only run";

  std::ostringstream csv;
  csv << std::setprecision(17) << "step";
  for (auto v : pipeline::kAllVariants) csv << ',' << pipeline::to_string(v);
  csv << '\n';
  for (std::size_t s = 0; s < run.steps; ++s) {
    csv << s;
    for (auto v : pipeline::kAllVariants) csv << ',' << run.error(v).decode[s];
    csv << '\n';
  }
  const auto dir = detail::out_dir(rc);
  const std::string text = detail::dump(report);
  detail::write_report(dir / "simulate.json", text);
  detail::write_report(dir / "simulate.csv", csv.str());
  if (rc.format == "csv") {
    out << csv.str();
  } else if (rc.format == "table") {
    out << std::left << std::setw(14) << "variant" << std::right << std::setw(14) << "median"
        << std::setw(14) << "p95" << std::setw(14) << "max" << '\n';
    for (auto v : pipeline::kAllVariants) {
      const auto& s = run.error(v).decode_summary;
      out << std::left << std::setw(14) << pipeline::to_string(v) << std::right
          << std::scientific << std::setprecision(4) << std::setw(14) << s.median
          << std::setw(14) << s.p95 << std::setw(14) << s.max << std::defaultfloat << '\n';
    }
  } else {
    out << text;
  }
  return kExitOk;
}

namespace detail {

inline cost::DeploymentSpec spec_from_json(const json& j, cost::DeploymentSpec s) {
  try {
    if (j.contains("model")) s.model = io::config_from_json(j.at("model"), s.model);
    if (j.contains("mode")) s.mode = cost::parse_attention_mode(j.at("mode").get<std::string>());
    s.devices = j.value("k", s.devices);
    s.groups = j.value("g", s.groups);
    s.kv_heads = j.value("kv_heads", s.kv_heads);
    s.context = j.value("context", s.context);
    s.query_len = j.value("query_len", s.query_len);
    s.batch = j.value("batch", s.batch);
    s.bytes_per_element = j.value("bytes_per_element", s.bytes_per_element);
    if (j.contains("hardware")) {
      const auto& h = j.at("hardware");
      if (!h.is_object()) throw UsageError("hardware must be an object");
      s.hw.bandwidth = h.value("bandwidth", s.hw.bandwidth);
      s.hw.flops = h.value("flops", s.hw.flops);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed deployment spec: ") + e.what());
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return s;
}

inline json cost_json(const cost::CostReport& r) {
  return {{"mode", cost::to_string(r.spec.mode)},
          {"k", r.spec.devices},
          {"g", r.spec.groups},
          {"context", r.spec.context},
          {"query_len", r.spec.query_len},
          {"batch", r.spec.batch},
          {"kv_elements_per_token", r.kv.elements},
          {"kv_bytes_per_token", r.kv.bytes},
          {"kv_bytes_per_step", r.kv_bytes_per_step},
          {"collective_bytes_per_step", r.collective_bytes_per_step},
          {"flops",
           {{"nope", r.flops.nope},
            {"rope", r.flops.rope},
            {"kv_projection", r.flops.kv_projection},
            {"q_projection", r.flops.q_projection},
            {"out_projection", r.flops.out_projection},
            {"total", r.flops.total()}}},
          {"arithmetic_intensity", r.arithmetic_intensity},
          {"balance_point", r.balance_point},
          {"bound", r.memory_bound ? "memory" : "compute"}};
}

}  // namespace detail

// cost: MLA vs TPLA decode and prefill predictions.
inline int cmd_cost(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  (void)err;
  cost::DeploymentSpec base;
  base.model = detail::resolve_model(rc, "dsv3-dims");
  base.devices = rc.k;
  base.context = rc.context;
  base.query_len = rc.query_len;
  base.batch = rc.batch;
  base.bytes_per_element = rc.bytes_per_element;
  base.hw = {rc.bandwidth, rc.flops};
  if (!rc.spec_path.empty()) base = detail::spec_from_json(detail::read_json_file(rc.spec_path), base);
  if (!(base.hw.bandwidth > 0.0) || !(base.hw.flops > 0.0))
    throw UsageError("hardware bandwidth and compute must be positive");

  cost::DeploymentSpec mla_spec = base;
  mla_spec.mode = cost::AttentionMode::mla;
  mla_spec.groups = 1;
  cost::DeploymentSpec tpla_spec = base;
  tpla_spec.mode = cost::AttentionMode::tpla;
  tpla_spec.groups = rc.g;
  try {
    mla_spec.validate();
    tpla_spec.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const auto decode = cost::predict_ratios(mla_spec, tpla_spec);

  // Prefill: sliced TPLA against MLA on the same devices (what pd-sep runs).
  cost::DeploymentSpec tpla_pre = tpla_spec, mla_pre = mla_spec;
  tpla_pre.query_len = mla_pre.query_len = rc.prefill_len;
  tpla_pre.context = mla_pre.context = rc.prefill_len;
  const auto prefill = cost::predict_ratios(tpla_pre, mla_pre);

  json report;
  report["model"] = io::config_to_json(base.model);
  report["hardware"] = {{"bandwidth", base.hw.bandwidth}, {"flops", base.hw.flops}};
  report["decode"] = {{"mla", detail::cost_json(decode.a)},
                      {"tpla", detail::cost_json(decode.b)},
                      {"throughput_ratio", decode.decode_throughput_ratio},
                      {"regime", decode.decode_regime}};
  report["prefill"] = {{"tpla_sliced", detail::cost_json(prefill.a)},
                       {"mla_pd_sep", detail::cost_json(prefill.b)},
                       {"latency_ratio", prefill.prefill_latency_ratio}};
  report["scope"] =
      "static model: bytes and FLOPs only, no queueing, kernel launch or overlap effects";
  const std::string text = detail::dump(report);
  if (!rc.out_dir.empty() || std::getenv(kOutDirEnv))
    detail::write_report(detail::out_dir(rc) / "cost.json", text);

  if (rc.format == "table") {
    out << cost::format_table({{"decode mla", decode.a},
                               {"decode tpla", decode.b},
                               {"prefill tpla", prefill.a},
                               {"prefill mla", prefill.b}});
    std::ostringstream ratios;
    ratios << std::fixed << std::setprecision(3);
    ratios << "decode throughput ratio (tpla/mla): " << decode.decode_throughput_ratio << '\n'
           << "prefill latency ratio (sliced tpla / pd-sep mla): "
           << prefill.prefill_latency_ratio << '\n';
    out << ratios.str();
  } else {
    out << text;
  }
  return kExitOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-attention tensor-parallel verification harness", "tpla"};
  app.require_subcommand(1);
  RunConfig rc;

  auto add_common = [&rc](CLI::App* sub) {
    sub->add_option("--config", rc.config_path, "model config JSON file");
    sub->add_option("--preset", rc.preset, "model preset: toy or dsv3-dims");
    sub->add_option("--seed", rc.seed, "base seed");
    sub->add_option("--out", rc.out_dir, "output directory (default $TPLA_OUT_DIR or .)");
    sub->add_option("--format", rc.format, "output format")
        ->check(CLI::IsMember({"json", "csv", "table"}));
  };
  auto add_transform = [&rc](CLI::App* sub) {
    sub->add_option("--transform", rc.transform, "identity, hadamard or pca")
        ->check(CLI::IsMember({"identity", "hadamard", "pca"}));
    sub->add_option("--transform-file", rc.transform_file, "transform container from calibrate");
    sub->add_flag("--center", rc.center, "mean-center PCA features");
    sub->add_option("--calibration-rows", rc.calibration_rows, "synthetic calibration rows");
  };
  auto add_plan = [&rc](CLI::App* sub) {
    sub->add_option("--k", rc.k, "device count");
    sub->add_option("--g", rc.g, "latent group count");
    sub->add_option("--mode", rc.mode, "shard mode")
        ->check(CLI::IsMember({"tpla", "mla_heads", "gla"}));
    sub->add_option("--exactness", rc.exactness, "slicing mode")
        ->check(CLI::IsMember({"sliced", "exact_rms", "exact_softmax", "exact_both"}));
  };

  auto* verify = app.add_subcommand("verify", "run equivalence invariants");
  add_common(verify);
  add_transform(verify);
  add_plan(verify);
  verify->add_option("--seeds", rc.seeds, "number of seeds")->check(CLI::PositiveNumber);
  verify->add_option("--tol", rc.tolerance, "tolerance for equivalence checks");

  auto* calibrate = app.add_subcommand("calibrate", "build a transform and write transform.bin");
  add_common(calibrate);
  add_transform(calibrate);
  calibrate->add_option("--g", rc.g, "latent group count");
  calibrate->add_option("--calibration", rc.calibration_path, "calibration container");
  calibrate->add_option("--synthetic", rc.synthetic_spec,
                        "comma-separated eigenvalues of a synthetic calibration set");

  auto* simulate = app.add_subcommand("simulate", "compare mla_only, tpla_full and tpla_pd_sep");
  add_common(simulate);
  add_transform(simulate);
  add_plan(simulate);
  simulate->add_option("--steps", rc.steps, "decode steps");
  simulate->add_option("--prompt-len", rc.prompt_len, "prompt length");
  simulate->add_option("--feeding", rc.feeding, "decode input feeding")
      ->check(CLI::IsMember({"autonomous", "teacher_forced"}));
  simulate->add_option("--prefill-rows", rc.prefill_rows, "normalization of handed-over rows")
      ->check(CLI::IsMember({"sliced", "exact"}));

  auto* costc = app.add_subcommand("cost", "analytical KV-cache and FLOP model");
  add_common(costc);
  costc->add_option("--spec", rc.spec_path, "deployment spec JSON file");
  costc->add_option("--k", rc.k, "device count");
  costc->add_option("--g", rc.g, "latent group count for tpla");
  costc->add_option("--context", rc.context, "cached tokens S_kv");
  costc->add_option("--query-len", rc.query_len, "decode query length");
  costc->add_option("--prefill-len", rc.prefill_len, "prompt length for the prefill comparison");
  costc->add_option("--batch", rc.batch, "batch size");
  costc->add_option("--bytes", rc.bytes_per_element, "bytes per cache element");
  costc->add_option("--bandwidth", rc.bandwidth, "device bandwidth in bytes/s");
  costc->add_option("--flops", rc.flops, "device compute in FLOP/s");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*verify) {
      rc.subcommand = "verify";
      return cmd_verify(rc, out, err);
    }
    if (*calibrate) {
      rc.subcommand = "calibrate";
      return cmd_calibrate(rc, out, err);
    }
    if (*simulate) {
      rc.subcommand = "simulate";
      return cmd_simulate(rc, out, err);
    }
    rc.subcommand = "cost";
    return cmd_cost(rc, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
}

}  // namespace tpla::cli
