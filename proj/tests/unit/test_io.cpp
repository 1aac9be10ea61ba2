#include <gtest/gtest.h>

#include <filesystem>

#include "tpla/io/container.hpp"
#include "tpla/mla/synthetic.hpp"
#include "tpla/pipeline/experiment.hpp"

using namespace tpla;
using namespace tpla::io;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("tpla_io_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Container, LayoutIsLittleEndianWithJsonHeader) {
  Container c;
  c.add("x", Matrix::from_rows({{1.0, -2.0}}));
  const std::string b = serialize(c);
  ASSERT_GE(b.size(), 16u);
  EXPECT_EQ(b.substr(0, 8), "TPLABIN1");
  std::uint64_t h = 0;
  for (int i = 7; i >= 0; --i) h = (h << 8) | static_cast<unsigned char>(b[8 + static_cast<std::size_t>(i)]);
  const auto header = json::parse(b.substr(16, h));
  EXPECT_EQ(header["dtype"], "f64");
  EXPECT_EQ(header["byte_order"], "little");
  EXPECT_EQ(header["tensors"][0]["rows"], 1);
  EXPECT_EQ(b.size(), 16 + h + 16);
  // 1.0 is 0x3ff0000000000000: last payload byte of the first value is 0x3f.
  EXPECT_EQ(static_cast<unsigned char>(b[16 + h + 7]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(b[16 + h + 6]), 0xf0);
}

TEST(Container, WeightsRoundTripBitExact) {
  mla::SyntheticOptions o;
  o.gamma = mla::GammaInit::perturbed;
  const auto m = mla::make_synthetic_model(mla::toy_config(), 3, o);
  const auto dir = temp_dir("weights");
  save(dir / "w.bin", to_container(m.weights));
  EXPECT_EQ(weights_from_container(load(dir / "w.bin")), m.weights);
  EXPECT_FALSE(std::filesystem::exists(dir / "w.bin.tmp"));
}

TEST(Container, TransformRoundTrip) {
  const auto cal = reparam::spectrum_calibration({4, 3, 2, 1}, Matrix::identity(4));
  const auto t = reparam::build_pca(cal, 2);
  const auto back = transform_from_container(deserialize(serialize(to_container(t))));
  EXPECT_EQ(back.u, t.u);
  EXPECT_EQ(back.kind, t.kind);
  EXPECT_EQ(back.rms_scale, t.rms_scale);
  EXPECT_EQ(back.logit_scale, t.logit_scale);
  EXPECT_EQ(back.energy_fractions, t.energy_fractions);
  EXPECT_EQ(back.eigenvalues, t.eigenvalues);
}

TEST(Container, CalibrationRoundTrip) {
  SeededRng rng(4);
  reparam::CalibrationSet cal{gaussian_matrix(rng, 10, 8), "test"};
  const auto back = calibration_from_container(deserialize(serialize(to_container(cal))));
  EXPECT_EQ(back.features, cal.features);
  EXPECT_EQ(back.source, "test");
}

TEST(Container, ContentHashTracksTensorsOnly) {
  Container a;
  a.add("x", Matrix::from_rows({{1.0, 2.0}}));
  Container b = a;
  b.meta["note"] = "ignored";
  EXPECT_EQ(content_hash(a), content_hash(b));
  Container c;
  c.add("x", Matrix::from_rows({{1.0, 2.0000000000000004}}));
  EXPECT_NE(content_hash(a), content_hash(c));
}

TEST(Container, Fnv1aReferenceVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Container, RejectsCorruptInput) {
  Container c;
  c.add("x", Matrix(2, 2));
  const std::string good = serialize(c);
  EXPECT_THROW(deserialize("nope"), FormatError);
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(deserialize(bad), FormatError);
  EXPECT_THROW(deserialize(good.substr(0, good.size() - 8)), FormatError);
  std::string huge = good;
  huge[15] = '\x7f';
  EXPECT_THROW(deserialize(huge), FormatError);
  EXPECT_THROW(weights_from_container(c), FormatError);
  EXPECT_THROW(transform_from_container(c), FormatError);
}

TEST(PlanJson, RoundTrip) {
  const auto p = shard::make_plan(mla::toy_config(), 4, 2, shard::ShardMode::tpla);
  EXPECT_EQ(plan_from_json(plan_to_json(p)), p);
}

TEST(ConfigJson, RoundTripAndValidation) {
  const auto c = mla::dsv3_config();
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
  EXPECT_EQ(config_from_json(json{{"preset", "dsv3-dims"}}), c);
  EXPECT_THROW(config_from_json(json{{"bogus", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"rope_dim", 3}}), ConfigError);
  EXPECT_THROW(config_from_json(json::array()), ConfigError);
}
