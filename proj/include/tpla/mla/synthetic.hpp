#pragma once

// Seeded synthetic models and inputs for the verification harness.

#include <cmath>
#include <cstdint>

#include "tpla/mla/weights.hpp"
#include "tpla/numerics/rng.hpp"

namespace tpla::mla {

// Latent-channel energy profile: channel of rank r gets standard deviation
// decay^r (renormalized to unit mean square). When `scatter` is set the ranks
// are assigned to channels by a random permutation, so strong channels land
// anywhere on the latent axis, as outlier channels do in trained models.
struct AnisotropyOptions {
  double decay = 0.7;
  bool scatter = true;
};

inline std::vector<double> channel_scales(std::size_t latent, SeededRng& rng,
                                          const AnisotropyOptions& opt) {
  std::vector<double> scales(latent);
  std::vector<std::size_t> rank(latent);
  if (opt.scatter) {
    rank = rng.permutation(latent);
  } else {
    for (std::size_t i = 0; i < latent; ++i) rank[i] = i;
  }
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < latent; ++i) {
    scales[i] = std::pow(opt.decay, static_cast<double>(rank[i]));
    mean_sq += scales[i] * scales[i];
  }
  mean_sq /= static_cast<double>(latent);
  for (double& s : scales) s /= std::sqrt(mean_sq);
  return scales;
}

// Rescales the columns of W_DKV so latents follow the given energy profile.
inline WeightSet make_anisotropic(WeightSet w, SeededRng& rng,
                                  const AnisotropyOptions& opt = {}) {
  const auto scales = channel_scales(w.down_kv.cols(), rng, opt);
  for (std::size_t i = 0; i < w.down_kv.rows(); ++i) {
    auto row = w.down_kv.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] *= scales[j];
  }
  return w;
}

// Standard normal token activations.
inline Matrix random_inputs(SeededRng& rng, std::size_t len, std::size_t hidden) {
  return gaussian_matrix(rng, len, hidden);
}

// Everything a seeded experiment needs: weights plus a prompt.
struct SyntheticModel {
  ModelConfig cfg;
  WeightSet weights;
  Matrix prompt;
};

struct SyntheticOptions {
  double scale = 1.0;
  GammaInit gamma = GammaInit::ones;
  bool anisotropic = true;
  AnisotropyOptions anisotropy{};
  std::size_t prompt_len = 8;
};

inline SyntheticModel make_synthetic_model(const ModelConfig& cfg, std::uint64_t seed,
                                           const SyntheticOptions& opt = {}) {
  SeededRng rng(seed);
  SyntheticModel m;
  m.cfg = cfg;
  m.weights = init_weights(cfg, rng, opt.scale, opt.gamma);
  if (opt.anisotropic) m.weights = make_anisotropic(std::move(m.weights), rng, opt.anisotropy);
  m.prompt = random_inputs(rng, opt.prompt_len, cfg.hidden_dim);
  return m;
}

}  // namespace tpla::mla
