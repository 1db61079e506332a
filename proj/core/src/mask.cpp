#include "rgdno/mask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rgdno/errors.hpp"
#include "rgdno/optimizer.hpp"
#include "rgdno/parallel.hpp"

namespace rgdno {

MaskFamily mask_family_from(const std::string& name) {
  if (name == "temporal") return MaskFamily::kTemporal;
  if (name == "spatial") return MaskFamily::kSpatial;
  if (name == "both") return MaskFamily::kBoth;
  throw ValidationError("mask: unknown family '" + name + "'");
}

const char* mask_family_name(MaskFamily f) {
  switch (f) {
    case MaskFamily::kTemporal: return "temporal";
    case MaskFamily::kSpatial: return "spatial";
    case MaskFamily::kBoth: return "both";
  }
  return "?";
}

MaskForce mask_force_from(const std::string& name) {
  if (name == "none" || name.empty()) return MaskForce::kNone;
  if (name == "ones") return MaskForce::kOnes;
  if (name == "zeros") return MaskForce::kZeros;
  if (name == "half") return MaskForce::kHalf;
  throw ValidationError("mask: unknown force mode '" + name + "'");
}

SpatialPartition SpatialPartition::stick_agent() {
  // The root splits into its two axes so the partition lands on 8 groups
  // (2^8 spatial candidates).
  SpatialPartition p;
  p.groups = {
      {"root_x", col::kRootX, 1},   {"root_z", col::kRootZ, 1},
      {"pelvis", col::kPelvisY, 1}, {"head", col::kHeadY, 1},
      {"lfoot", col::kLFoot, 3},    {"rfoot", col::kRFoot, 3},
      {"lhand", col::kLHand, 3},    {"rhand", col::kRHand, 3},
  };
  return p;
}

void SpatialPartition::validate(int feature_dim) const {
  std::vector<int> owner(static_cast<std::size_t>(feature_dim), -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& grp = groups[g];
    for (int c = grp.start; c < grp.start + grp.count; ++c) {
      if (c < 0 || c >= feature_dim || owner[static_cast<std::size_t>(c)] != -1) {
        throw ValidationError("spatial partition: column " +
                              std::to_string(c) + " not covered exactly once");
      }
      owner[static_cast<std::size_t>(c)] = static_cast<int>(g);
    }
  }
  for (int c = 0; c < feature_dim; ++c) {
    if (owner[static_cast<std::size_t>(c)] == -1) {
      throw ValidationError("spatial partition: column " + std::to_string(c) +
                            " unassigned");
    }
  }
}

Tensor combine(const Mask& m, const Tensor& z1, const Tensor& z2) {
  if (!m.values.defined() || m.values.shape() != z1.shape() ||
      z1.shape() != z2.shape()) {
    throw ValidationError("combine: mask and noise shapes must match");
  }
  return mul(m.values, z1) + mul(1.0 - m.values, z2);
}

std::vector<Mask> enumerate_temporal(int length, int features, int n_blocks) {
  if (n_blocks < 1 || n_blocks > 12) {
    throw ValidationError("mask: temporal block count must be in [1,12]");
  }
  const int base = length / n_blocks;
  if (base < 1) throw ValidationError("mask: more temporal blocks than frames");
  std::vector<Mask> out;
  out.reserve(1u << n_blocks);
  for (std::uint32_t bits = 0; bits < (1u << n_blocks); ++bits) {
    Mask m;
    m.structure = "temporal";
    m.bits = bits;
    m.blocks = n_blocks;
    m.values = Tensor::zeros({length, features});
    double* v = m.values.data();
    for (int b = 0; b < n_blocks; ++b) {
      if (!(bits & (1u << b))) continue;
      const int from = b * base;
      const int to = (b == n_blocks - 1) ? length : (b + 1) * base;
      for (int t = from; t < to; ++t) {
        for (int c = 0; c < features; ++c) {
          v[static_cast<std::size_t>(t) * features + c] = 1.0;
        }
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Mask> enumerate_spatial(int length,
                                    const SpatialPartition& partition) {
  const int n = static_cast<int>(partition.groups.size());
  if (n < 1 || n > 12) {
    throw ValidationError("mask: spatial group count must be in [1,12]");
  }
  partition.validate(kFeatureDim);
  std::vector<Mask> out;
  out.reserve(1u << n);
  for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
    Mask m;
    m.structure = "spatial";
    m.bits = bits;
    m.blocks = n;
    m.values = Tensor::zeros({length, kFeatureDim});
    double* v = m.values.data();
    for (int g = 0; g < n; ++g) {
      if (!(bits & (1u << g))) continue;
      const auto& grp = partition.groups[static_cast<std::size_t>(g)];
      for (int t = 0; t < length; ++t) {
        for (int c = grp.start; c < grp.start + grp.count; ++c) {
          v[static_cast<std::size_t>(t) * kFeatureDim + c] = 1.0;
        }
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Mask> enumerate_candidates(int length, int features,
                                       const SpatialPartition& partition,
                                       const MaskSettings& settings) {
  std::vector<Mask> out;
  if (settings.families == MaskFamily::kTemporal ||
      settings.families == MaskFamily::kBoth) {
    auto t = enumerate_temporal(length, features, settings.temporal_blocks);
    out.insert(out.end(), std::make_move_iterator(t.begin()),
               std::make_move_iterator(t.end()));
  }
  if (settings.families == MaskFamily::kSpatial ||
      settings.families == MaskFamily::kBoth) {
    auto s = enumerate_spatial(length, partition);
    out.insert(out.end(), std::make_move_iterator(s.begin()),
               std::make_move_iterator(s.end()));
  }
  return out;
}

namespace {

double blend_objective_value(const Tensor& z_prime,
                             const ConstraintSet& full_set,
                             const RewardConfig& rewards, const Checkpoint& ck,
                             const Condition& cond) {
  auto normalized = ddim_sample_normalized(ck, z_prime, cond);
  auto frames_m = denormalize_frames(normalized, ck.norm_mean, ck.norm_std);
  auto loss = constraint_loss(full_set, frames_m) +
              reward_loss(frames_m, z_prime, rewards);
  return loss.item();
}

}  // namespace

MaskSelection select_mask(const std::vector<Mask>& candidates,
                          const Tensor& z1, const Tensor& z2,
                          const ConstraintSet& full_set,
                          const RewardConfig& rewards, const Checkpoint& ck,
                          const Condition& cond, int workers) {
  if (candidates.empty()) throw ValidationError("select_mask: no candidates");
  std::vector<double> scores(candidates.size());
  parallel_for(
      candidates.size(),
      [&](std::size_t i) {
        NoGradGuard guard;
        auto z_prime = combine(candidates[i], z1, z2);
        scores[i] = blend_objective_value(z_prime, full_set, rewards, ck, cond);
      },
      workers);

  int best = -1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) continue;
    if (best < 0 || scores[i] < scores[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    throw RuntimeFailure("select_mask: every candidate scored non-finite");
  }
  MaskSelection sel;
  sel.mask = candidates[static_cast<std::size_t>(best)];
  sel.score = scores[static_cast<std::size_t>(best)];
  sel.index = best;
  sel.scores = std::move(scores);
  return sel;
}

SoftBlendResult soft_blend(const Mask& m, const Tensor& z1, const Tensor& z2,
                           const ConstraintSet& full_set,
                           const RewardConfig& rewards, const Checkpoint& ck,
                           const Condition& cond, int steps, double lr) {
  // +-4 logits reproduce the binary pattern as sigmoid values 0.982/0.018.
  std::vector<double> logits(static_cast<std::size_t>(m.values.numel()));
  const double* mv = m.values.data();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] = mv[i] >= 0.5 ? 4.0 : -4.0;
  }
  auto init = Tensor::from(m.values.shape(), std::move(logits));

  auto objective = [&](const Tensor& raw) {
    auto blend_mask = sigmoid(raw);
    auto z_prime = mul(blend_mask, z1) + mul(1.0 - blend_mask, z2);
    auto normalized = ddim_sample_normalized(ck, z_prime, cond);
    auto frames_m = denormalize_frames(normalized, ck.norm_mean, ck.norm_std);
    return constraint_loss(full_set, frames_m) +
           reward_loss(frames_m, z_prime, rewards);
  };

  OptimizerConfig cfg;
  cfg.learning_rate = lr;
  cfg.steps = steps;

  SoftBlendResult result;
  try {
    auto opt = optimize_noise(init, objective, cfg);
    result.mask.values = sigmoid(opt.best.detach());
    result.mask.structure = "soft";
    result.mask.blocks = m.blocks;
    result.mask.bits = m.bits;
    result.objective = opt.best_loss;
  } catch (const RuntimeFailure&) {
    result.mask = m;
    result.degraded = true;
    NoGradGuard guard;
    result.objective =
        blend_objective_value(combine(m, z1, z2), full_set, rewards, ck, cond);
  }
  return result;
}

}  // namespace rgdno
