#pragma once

// Flat tensor container.
//
//   bytes 0..7    magic "TPLABIN1"
//   bytes 8..15   header length H, uint64 little-endian
//   next H bytes  UTF-8 JSON header
//   payload       float64 little-endian, tensors back to back, row-major
//
// Header: {"format":"tpla-container","version":1,"dtype":"f64",
//          "byte_order":"little","tensors":[{"name","rows","cols","offset"}],
//          "meta":{...}}. Offsets count bytes from the start of the payload.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpla/error.hpp"
#include "tpla/mla/weights.hpp"
#include "tpla/numerics/matrix.hpp"
#include "tpla/reparam/transform.hpp"
#include "tpla/shard/plan.hpp"

namespace tpla::io {

using json = nlohmann::ordered_json;

inline constexpr char kMagic[8] = {'T', 'P', 'L', 'A', 'B', 'I', 'N', '1'};
inline constexpr int kFormatVersion = 1;

struct Container {
  std::vector<std::pair<std::string, Matrix>> tensors;
  json meta = json::object();

  void add(std::string name, Matrix m) { tensors.emplace_back(std::move(name), std::move(m)); }

  bool contains(const std::string& name) const {
    for (const auto& [n, m] : tensors)
      if (n == name) return true;
    return false;
  }

  const Matrix& get(const std::string& name) const {
    for (const auto& [n, m] : tensors)
      if (n == name) return m;
    throw FormatError("container has no tensor '" + name + "'");
  }
};

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

inline void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

inline double get_f64(const char* p) { return std::bit_cast<double>(get_u64(p)); }

}  // namespace detail

inline std::string serialize(const Container& c) {
  json header;
  header["format"] = "tpla-container";
  header["version"] = kFormatVersion;
  header["dtype"] = "f64";
  header["byte_order"] = "little";
  json list = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : c.tensors) {
    list.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += m.size() * 8;
  }
  header["tensors"] = std::move(list);
  header["meta"] = c.meta;
  const std::string h = header.dump();

  std::string out(kMagic, 8);
  ::tpla::io::detail::put_u64(out, h.size());
  out += h;
  out.reserve(out.size() + offset);
  for (const auto& [name, m] : c.tensors)
    for (double v : m.data()) ::tpla::io::detail::put_f64(out, v);
  return out;
}

inline Container deserialize(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw FormatError("not a tensor container (bad magic)");
  const std::uint64_t hlen = ::tpla::io::detail::get_u64(bytes.data() + 8);
  if (hlen > bytes.size() - 16) throw FormatError("truncated container header");
  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const json::exception& e) {
    throw FormatError(std::string("container header is not valid JSON: ") + e.what());
  }
  if (header.value("format", "") != "tpla-container" || header.value("version", 0) != kFormatVersion)
    throw FormatError("unsupported container format/version");
  if (header.value("dtype", "") != "f64" || header.value("byte_order", "") != "little")
    throw FormatError("unsupported dtype or byte order");

  const std::size_t base = 16 + hlen;
  const std::size_t payload = bytes.size() - base;
  Container c;
  c.meta = header.value("meta", json::object());
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<std::size_t>();
    const auto cols = t.at("cols").get<std::size_t>();
    const auto off = t.at("offset").get<std::size_t>();
    if (cols != 0 && rows > payload / 8 / cols) throw FormatError("tensor larger than payload");
    if (off > payload || rows * cols * 8 > payload - off)
      throw FormatError("tensor '" + t.at("name").get<std::string>() + "' exceeds payload");
    Matrix m(rows, cols);
    const char* p = bytes.data() + base + off;
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = ::tpla::io::detail::get_f64(p + 8 * i);
    c.add(t.at("name").get<std::string>(), std::move(m));
  }
  return c;
}

inline std::uint64_t content_hash(const Container& c) {
  // Meta is excluded so the hash identifies tensor contents only.
  std::string buf;
  for (const auto& [name, m] : c.tensors) {
    buf += name;
    buf.push_back('\0');
    ::tpla::io::detail::put_u64(buf, m.rows());
    ::tpla::io::detail::put_u64(buf, m.cols());
    for (double v : m.data()) ::tpla::io::detail::put_f64(buf, v);
  }
  return fnv1a(buf);
}

// Writes to a sibling temporary and renames it over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + tmp.string() + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void save(const std::filesystem::path& path, const Container& c) {
  write_file_atomic(path, serialize(c));
}

inline Container load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

// Weights.

inline Container to_container(const mla::WeightSet& w) {
  Container c;
  c.add("W_DKV", w.down_kv);
  c.add("W_UK", w.up_k);
  c.add("W_UV", w.up_v);
  c.add("W_DQ", w.down_q);
  c.add("W_UQ", w.up_q);
  c.add("W_QR", w.q_rope);
  c.add("W_KR", w.k_rope);
  c.add("W_O", w.out);
  c.add("gamma", Matrix::row_vector(w.gamma));
  c.meta["kind"] = "weights";
  c.meta["gamma_folded"] = w.gamma_folded;
  c.meta["basis"] = w.basis;
  return c;
}

inline mla::WeightSet weights_from_container(const Container& c) {
  if (c.meta.value("kind", "") != "weights") throw FormatError("container does not hold weights");
  mla::WeightSet w;
  w.down_kv = c.get("W_DKV");
  w.up_k = c.get("W_UK");
  w.up_v = c.get("W_UV");
  w.down_q = c.get("W_DQ");
  w.up_q = c.get("W_UQ");
  w.q_rope = c.get("W_QR");
  w.k_rope = c.get("W_KR");
  w.out = c.get("W_O");
  const auto g = c.get("gamma").data();
  w.gamma.assign(g.begin(), g.end());
  w.gamma_folded = c.meta.value("gamma_folded", false);
  w.basis = c.meta.value("basis", "original");
  return w;
}

// Transforms.

inline Container to_container(const reparam::OrthogonalTransform& t) {
  Container c;
  c.add("U", t.u);
  c.meta["kind"] = "transform";
  c.meta["transform"] = reparam::to_string(t.kind);
  c.meta["group_count"] = t.group_count;
  c.meta["energy_fractions"] = t.energy_fractions;
  c.meta["alpha"] = t.rms_scale;
  c.meta["mu"] = t.logit_scale;
  c.meta["eigenvalues"] = t.eigenvalues;
  c.meta["rank_deficient"] = t.rank_deficient;
  return c;
}

inline reparam::OrthogonalTransform transform_from_container(const Container& c) {
  if (c.meta.value("kind", "") != "transform")
    throw FormatError("container does not hold a transform");
  reparam::OrthogonalTransform t;
  try {
    t.u = c.get("U");
    t.kind = reparam::parse_transform_kind(c.meta.at("transform").get<std::string>());
    t.group_count = c.meta.at("group_count").get<std::size_t>();
    t.energy_fractions = c.meta.at("energy_fractions").get<std::vector<double>>();
    t.rms_scale = c.meta.at("alpha").get<std::vector<double>>();
    t.logit_scale = c.meta.at("mu").get<std::vector<double>>();
    t.eigenvalues = c.meta.value("eigenvalues", std::vector<double>{});
    t.rank_deficient = c.meta.value("rank_deficient", false);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed transform metadata: ") + e.what());
  }
  return t;
}

// Calibration features.

inline Container to_container(const reparam::CalibrationSet& cal) {
  Container c;
  c.add("features", cal.features);
  c.meta["kind"] = "calibration";
  c.meta["source"] = cal.source;
  return c;
}

inline reparam::CalibrationSet calibration_from_container(const Container& c) {
  if (c.meta.value("kind", "") != "calibration")
    throw FormatError("container does not hold calibration features");
  return {c.get("features"), c.meta.value("source", "file")};
}

// Plans.

inline json plan_to_json(const shard::ShardPlan& p) {
  json j;
  j["devices"] = p.devices;
  j["groups"] = p.groups;
  j["mode"] = shard::to_string(p.mode);
  j["num_heads"] = p.num_heads;
  j["latent_dim"] = p.latent_dim;
  json a = json::array();
  for (const auto& d : p.assignments)
    a.push_back({{"device", d.device},
                 {"group", d.group},
                 {"member", d.member},
                 {"heads", {d.heads.begin, d.heads.end}},
                 {"latent", {d.latent.begin, d.latent.end}}});
  j["assignments"] = std::move(a);
  return j;
}

inline shard::ShardPlan plan_from_json(const json& j) {
  shard::ShardPlan p;
  p.devices = j.at("devices").get<std::size_t>();
  p.groups = j.at("groups").get<std::size_t>();
  p.mode = shard::parse_shard_mode(j.at("mode").get<std::string>());
  p.num_heads = j.at("num_heads").get<std::size_t>();
  p.latent_dim = j.at("latent_dim").get<std::size_t>();
  for (const auto& d : j.at("assignments")) {
    shard::DeviceAssignment a;
    a.device = d.at("device").get<std::size_t>();
    a.group = d.at("group").get<std::size_t>();
    a.member = d.at("member").get<std::size_t>();
    a.heads = {d.at("heads").at(0).get<std::size_t>(), d.at("heads").at(1).get<std::size_t>()};
    a.latent = {d.at("latent").at(0).get<std::size_t>(), d.at("latent").at(1).get<std::size_t>()};
    p.assignments.push_back(a);
  }
  return p;
}

// Model configs.

inline json config_to_json(const mla::ModelConfig& c) {
  return {{"head_dim", c.head_dim},   {"num_heads", c.num_heads}, {"hidden_dim", c.hidden_dim},
          {"rope_dim", c.rope_dim},   {"q_rank", c.q_rank},       {"latent_dim", c.latent_dim},
          {"eps", c.eps},             {"use_rope", c.use_rope}};
}

// Missing keys keep the values of `base`.
inline mla::ModelConfig config_from_json(const json& j, mla::ModelConfig base = {}) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  static const std::vector<std::string> known{"head_dim", "num_heads", "hidden_dim", "rope_dim",
                                              "q_rank",   "latent_dim", "eps",     "use_rope",
                                              "preset"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError("unknown model config key '" + k + "'");
  try {
    if (j.contains("preset")) base = mla::preset_config(j.at("preset").get<std::string>());
    base.head_dim = j.value("head_dim", base.head_dim);
    base.num_heads = j.value("num_heads", base.num_heads);
    base.hidden_dim = j.value("hidden_dim", base.hidden_dim);
    base.rope_dim = j.value("rope_dim", base.rope_dim);
    base.q_rank = j.value("q_rank", base.q_rank);
    base.latent_dim = j.value("latent_dim", base.latent_dim);
    base.eps = j.value("eps", base.eps);
    base.use_rope = j.value("use_rope", base.use_rope);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  base.validate();
  return base;
}

}  // namespace tpla::io
