#include <gtest/gtest.h>

#include "tpla/cost/cost_model.hpp"

using namespace tpla;
using namespace tpla::cost;

namespace {

DeploymentSpec dsv3(AttentionMode mode, std::uint64_t k, std::uint64_t g) {
  DeploymentSpec s;
  s.model = mla::dsv3_config();
  s.mode = mode;
  s.devices = k;
  s.groups = g;
  return s;
}

// Term-by-term counts written out independently of the library.
std::uint64_t nope_oracle(std::uint64_t lq, std::uint64_t skv, std::uint64_t heads,
                          std::uint64_t width) {
  return lq * skv * heads * width * 2 /* QK and PV */ * 2 /* FLOPs per MAC */;
}

}  // namespace

TEST(KvPerToken, MlaReplicatesEverywhere) {
  for (std::uint64_t k : {1u, 2u, 4u, 8u}) EXPECT_EQ(kv_per_token(dsv3(AttentionMode::mla, k, 1)).elements, 576u);
}

TEST(KvPerToken, TplaTwoGroups) {
  const auto f = kv_per_token(dsv3(AttentionMode::tpla, 2, 2));
  EXPECT_EQ(f.elements, 64u + 256u);
  EXPECT_EQ(f.bytes, 320u * 2u);
}

TEST(KvPerToken, GqaReference) {
  DeploymentSpec s;
  s.model.head_dim = 128;
  s.model.num_heads = 64;
  s.mode = AttentionMode::gqa;
  s.kv_heads = 8;
  s.devices = 1;
  EXPECT_EQ(kv_per_token(s).elements, 2048u);
  s.devices = 4;
  EXPECT_EQ(kv_per_token(s).elements, 512u);
}

TEST(KvPerToken, TplaStrictlyDecreasingInGroups) {
  std::uint64_t prev = ~0ULL;
  for (std::uint64_t g : {1u, 2u, 4u, 8u}) {
    const auto f = kv_per_token(dsv3(AttentionMode::tpla, 8, g));
    EXPECT_EQ(f.bytes, (64 + 512 / g) * 2);
    EXPECT_LT(f.bytes, prev);
    prev = f.bytes;
  }
}

TEST(Flops, NopeEqualOnGrid) {
  int cases = 0;
  for (std::uint64_t h : {8u, 16u, 128u})
    for (std::uint64_t dh : {64u, 128u, 192u})
      for (std::uint64_t skv : {1u, 4096u, 32768u}) {
        DeploymentSpec a = dsv3(AttentionMode::mla, 2, 1), b = dsv3(AttentionMode::tpla, 2, 2);
        for (auto* s : {&a, &b}) {
          s->model.num_heads = h;
          s->model.head_dim = dh;
          s->model.latent_dim = 4 * dh;
          s->context = skv;
        }
        const auto fa = attention_flops(a), fb = attention_flops(b);
        EXPECT_EQ(fa.nope, fb.nope);
        EXPECT_EQ(fa.nope, nope_oracle(1, skv, h / 2, 4 * dh));
        EXPECT_EQ(fb.nope, nope_oracle(1, skv, h, 2 * dh));
        ++cases;
      }
  EXPECT_GE(cases, 27);
}

TEST(Flops, RopeDoublesAtTwoByTwo) {
  const auto a = attention_flops(dsv3(AttentionMode::mla, 2, 1));
  const auto b = attention_flops(dsv3(AttentionMode::tpla, 2, 2));
  EXPECT_EQ(b.rope, 2 * a.rope);
  EXPECT_EQ(a.kv_projection - b.kv_projection, 2ULL * 7168 * 256);
  EXPECT_EQ(b.q_projection - a.q_projection, 2ULL * 7168 * 64 * 128);
  EXPECT_EQ(a.out_projection, b.out_projection);
}

TEST(Flops, SingleDeviceAllModesAgree) {
  const auto a = attention_flops(dsv3(AttentionMode::mla, 1, 1));
  const auto b = attention_flops(dsv3(AttentionMode::tpla, 1, 1));
  EXPECT_EQ(a.total(), b.total());
  EXPECT_EQ(a.nope, b.nope);
  EXPECT_EQ(a.rope, b.rope);
}

TEST(Ratios, DecodeRatioIsOnePointEight) {
  const auto r = predict_ratios(dsv3(AttentionMode::mla, 2, 1), dsv3(AttentionMode::tpla, 2, 2));
  EXPECT_DOUBLE_EQ(r.decode_throughput_ratio, 576.0 / 320.0);
  EXPECT_NEAR(r.decode_throughput_ratio, 1.8, 1e-15);
  EXPECT_LE(std::abs(r.decode_throughput_ratio - 1.79) / 1.79, 0.006);
  EXPECT_EQ(r.decode_regime, "memory");
}

TEST(Ratios, IdenticalSpecsGiveOne) {
  const auto s = dsv3(AttentionMode::tpla, 2, 2);
  const auto r = predict_ratios(s, s);
  EXPECT_EQ(r.decode_throughput_ratio, 1.0);
  EXPECT_EQ(r.prefill_latency_ratio, 1.0);
}

TEST(Ratios, PdSepPrefillIsCheaperThanSlicedTpla) {
  auto tp = dsv3(AttentionMode::tpla, 2, 2), ml = dsv3(AttentionMode::mla, 2, 1);
  tp.query_len = ml.query_len = 4096;
  tp.context = ml.context = 4096;
  const auto r = predict_ratios(tp, ml);
  EXPECT_GT(r.prefill_latency_ratio, 1.0);
  EXPECT_FALSE(r.b.memory_bound);
}

TEST(Ratios, RequireSharedHardware) {
  auto a = dsv3(AttentionMode::mla, 2, 1), b = dsv3(AttentionMode::tpla, 2, 2);
  b.hw.bandwidth *= 2;
  EXPECT_THROW(predict_ratios(a, b), ConfigError);
}

TEST(Spec, ValidationErrors) {
  auto s = dsv3(AttentionMode::tpla, 2, 4);
  EXPECT_THROW(s.validate(), ConfigError);
  s = dsv3(AttentionMode::mla, 2, 2);
  EXPECT_THROW(s.validate(), ConfigError);
  s = dsv3(AttentionMode::tpla, 2, 2);
  s.hw.flops = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = dsv3(AttentionMode::tpla, 2, 2);
  s.context = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Table, AlignedColumns) {
  const auto a = analyze(dsv3(AttentionMode::mla, 2, 1));
  const auto b = analyze(dsv3(AttentionMode::tpla, 2, 2));
  const std::string t = format_table({{"mla", a}, {"tpla", b}});
  std::vector<std::size_t> widths;
  std::size_t start = 0;
  while (start < t.size()) {
    const auto end = t.find('\n', start);
    widths.push_back(end - start);
    start = end + 1;
  }
  ASSERT_EQ(widths.size(), 3u);
  EXPECT_EQ(widths[0], widths[1]);
  EXPECT_EQ(widths[1], widths[2]);
  EXPECT_NE(t.find("576"), std::string::npos);
  EXPECT_NE(t.find("320"), std::string::npos);
}
