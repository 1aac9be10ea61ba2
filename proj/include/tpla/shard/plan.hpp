#pragma once

#include <string>
#include <vector>

#include "tpla/error.hpp"
#include "tpla/mla/config.hpp"
#include "tpla/numerics/matrix.hpp"

namespace tpla::shard {

enum class ShardMode {
  mla_heads,  // one latent group, heads split across devices
  gla,        // heads and latent both partitioned, diagonal blocks only
  tpla,       // latent partitioned, every group sees all heads
};

enum class Exactness { sliced, exact_rms, exact_softmax, exact_both };

inline std::string to_string(ShardMode m) {
  switch (m) {
    case ShardMode::mla_heads: return "mla_heads";
    case ShardMode::gla: return "gla";
    case ShardMode::tpla: return "tpla";
  }
  return "tpla";
}

inline ShardMode parse_shard_mode(const std::string& s) {
  if (s == "mla_heads") return ShardMode::mla_heads;
  if (s == "gla") return ShardMode::gla;
  if (s == "tpla") return ShardMode::tpla;
  throw ConfigError("unknown shard mode '" + s + "'");
}

inline std::string to_string(Exactness e) {
  switch (e) {
    case Exactness::sliced: return "sliced";
    case Exactness::exact_rms: return "exact_rms";
    case Exactness::exact_softmax: return "exact_softmax";
    case Exactness::exact_both: return "exact_both";
  }
  return "sliced";
}

inline Exactness parse_exactness(const std::string& s) {
  if (s == "sliced") return Exactness::sliced;
  if (s == "exact_rms") return Exactness::exact_rms;
  if (s == "exact_softmax") return Exactness::exact_softmax;
  if (s == "exact_both") return Exactness::exact_both;
  throw ConfigError("unknown exactness '" + s + "'");
}

inline bool exact_rms(Exactness e) { return e == Exactness::exact_rms || e == Exactness::exact_both; }
inline bool exact_softmax(Exactness e) {
  return e == Exactness::exact_softmax || e == Exactness::exact_both;
}

struct DeviceAssignment {
  std::size_t device = 0;
  std::size_t group = 0;   // latent slice index
  std::size_t member = 0;  // position inside the group
  Range heads;
  Range latent;

  bool operator==(const DeviceAssignment&) const = default;
};

// k devices in g groups of k/g. Device id = group * (k/g) + member. Group j
// owns latent columns [j*d/g, (j+1)*d/g). Heads are contiguous ranges:
//   tpla / mla_heads: member m of every group takes h_q/(k/g) heads.
//   gla: group j owns heads [j*h_q/g, (j+1)*h_q/g), split across members.
struct ShardPlan {
  std::size_t devices = 1;
  std::size_t groups = 1;
  ShardMode mode = ShardMode::tpla;
  std::size_t num_heads = 0;
  std::size_t latent_dim = 0;
  std::vector<DeviceAssignment> assignments;

  std::size_t group_size() const { return devices / groups; }
  std::size_t heads_per_device() const { return assignments.front().heads.size(); }
  std::size_t latent_per_device() const { return latent_dim / groups; }

  bool operator==(const ShardPlan&) const = default;
};

inline ShardPlan make_plan(const mla::ModelConfig& cfg, std::size_t k, std::size_t g,
                           ShardMode mode) {
  detail::require(k >= 1 && g >= 1, "make_plan: k and g must be >= 1");
  detail::require(k % g == 0, "make_plan: g=" + std::to_string(g) + " must divide k=" +
                                  std::to_string(k));
  detail::require(cfg.latent_dim % g == 0, "make_plan: g must divide the latent width");
  if (mode == ShardMode::mla_heads)
    detail::require(g == 1, "make_plan: mla_heads mode has a single latent group");
  const std::size_t per_group = k / g;
  const std::size_t h = cfg.num_heads;
  std::size_t heads_each = 0;
  if (mode == ShardMode::gla) {
    detail::require(h % k == 0, "make_plan: gla needs k to divide h_q");
    heads_each = h / k;
  } else {
    detail::require(h % per_group == 0, "make_plan: k/g must divide h_q");
    heads_each = h / per_group;
  }

  ShardPlan plan;
  plan.devices = k;
  plan.groups = g;
  plan.mode = mode;
  plan.num_heads = h;
  plan.latent_dim = cfg.latent_dim;
  const std::size_t width = cfg.latent_dim / g;
  for (std::size_t j = 0; j < g; ++j) {
    for (std::size_t m = 0; m < per_group; ++m) {
      DeviceAssignment a;
      a.device = j * per_group + m;
      a.group = j;
      a.member = m;
      a.latent = {j * width, (j + 1) * width};
      const std::size_t first = (mode == ShardMode::gla ? j * (h / g) : 0) + m * heads_each;
      a.heads = {first, first + heads_each};
      plan.assignments.push_back(a);
    }
  }
  return plan;
}

}  // namespace tpla::shard
