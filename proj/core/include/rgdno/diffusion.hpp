#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rgdno/corpus.hpp"
#include "rgdno/motion.hpp"
#include "rgdno/tensor.hpp"

namespace rgdno {

// Forward diffusion schedule; alpha_bar is the cumulative product of
// (1 - beta_t) over a linear beta ramp.
struct NoiseSchedule {
  int train_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::vector<double> alpha_bar;

  static NoiseSchedule linear(int steps = 1000, double beta_start = 1e-4,
                              double beta_end = 0.02);
  // Descending timesteps for an n-step deterministic sampler,
  // e.g. {999, 979, ..., 19} for n = 50.
  std::vector<int> respaced(int n) const;
};

// Optional tag condition (the text-condition stand-in) plus classifier-free
// guidance scale. Scale 0 is exactly unconditional; scale 1 is a single
// conditional pass.
struct Condition {
  std::vector<std::string> tags;
  double guidance_scale = 1.0;
};

struct DenoiserWeights {
  Tensor w1, b1, w2, b2, w3, b3, w4, b4;
  Tensor cond_embed;  // {vocab, cond_embed_dim}
};

struct Checkpoint {
  int length = 60;        // frames per motion
  int features = kFeatureDim;
  int width = 256;
  int time_embed_dim = 32;
  int cond_embed_dim = 32;
  int ddim_steps = 50;
  NoiseSchedule schedule;
  DenoiserWeights weights;
  std::vector<double> norm_mean, norm_std;
  std::vector<std::string> vocab;

  int flat_dim() const { return length * features; }
  void validate_noise_shape(const Tensor& z) const;
  std::vector<double> condition_vector(const Condition& c) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

struct TrainConfig {
  int steps = 6000;
  int batch = 128;
  double learning_rate = 1e-3;
  double cond_dropout = 0.1;
  int width = 256;
  int ddim_steps = 50;
  std::uint64_t seed = 1;
  std::vector<double>* epoch_losses_out = nullptr;  // optional
  std::function<void(int, double)> logger;          // (epoch, mean loss)
};

// Epsilon-prediction training on normalized corpus frames. Requires at
// least 1 sample; aborts with the step index if the loss goes NaN.
Checkpoint train(const Corpus& corpus, const TrainConfig& cfg);

// One denoiser evaluation with classifier-free guidance applied.
Tensor denoiser_eps(const Checkpoint& ck, const Tensor& z_t, int t,
                    const Condition& cond);

// A single deterministic sampler update, exposed for direct checks.
Tensor ddim_step(const Tensor& z_t, const Tensor& eps, double alpha_t,
                 double alpha_prev);

// Full deterministic chain z -> normalized motion frames; differentiable in
// z through every step.
Tensor ddim_sample_normalized(const Checkpoint& ck, const Tensor& z,
                              const Condition& cond);
// Convenience wrapper that de-normalizes into meters.
Motion ddim_sample(const Checkpoint& ck, const Tensor& z,
                   const Condition& cond);

// Deterministic reverse-recursion warm start for inversion.
Tensor ddim_invert_warm_start(const Checkpoint& ck, const Tensor& x_normalized,
                              const Condition& cond);

struct InversionResult {
  Tensor noise;
  double rmse = 0.0;        // reconstruction error in normalized units
  bool low_confidence = false;  // rmse > 0.2
  std::vector<double> loss_curve;
};

// Warm start + reconstruction-loss refinement (gradient-normalized Adam,
// cosine decay). steps = 0 returns the pure warm start.
InversionResult invert(const Checkpoint& ck, const Tensor& x_normalized,
                       const Condition& cond, int steps = 100,
                       double lr = 0.05);

}  // namespace rgdno
