#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgdno/constraints.hpp"
#include "rgdno/diffusion.hpp"
#include "rgdno/rewards.hpp"
#include "rgdno/tensor.hpp"

namespace rgdno {

enum class MaskFamily { kTemporal, kSpatial, kBoth };
MaskFamily mask_family_from(const std::string& name);
const char* mask_family_name(MaskFamily f);

// Debug/ablation override of the whole mask stage.
enum class MaskForce { kNone, kOnes, kZeros, kHalf };
MaskForce mask_force_from(const std::string& name);

struct MaskSettings {
  MaskFamily families = MaskFamily::kBoth;
  int temporal_blocks = 8;  // N_T; spatial block count comes from the partition
  MaskForce force = MaskForce::kNone;
  int soft_blend_steps = 50;
  double soft_blend_lr = 0.05;
};

// Blend tensor M in [0,1]^{T x d}; structured candidates are constant
// within temporal or feature-group blocks.
struct Mask {
  Tensor values;
  std::string structure;  // "temporal" | "spatial" | "soft" | "forced"
  std::uint32_t bits = 0;
  int blocks = 0;
};

struct SpatialPartition {
  struct Group {
    std::string name;
    int start = 0;
    int count = 0;
  };
  std::vector<Group> groups;

  static SpatialPartition stick_agent();  // 8 groups over the 16 columns
  void validate(int feature_dim) const;   // disjoint and exhaustive
};

// z' = M*z1 + (1-M)*z2, elementwise.
Tensor combine(const Mask& m, const Tensor& z1, const Tensor& z2);

// 2^n temporal block masks (equal-length segments, remainder to the last
// block). Bit i of the pattern sets segment i to 1.
std::vector<Mask> enumerate_temporal(int length, int features, int n_blocks);
// 2^groups spatial block masks over feature columns.
std::vector<Mask> enumerate_spatial(int length,
                                    const SpatialPartition& partition);
// Requested families in canonical order (temporal first). Block counts are
// capped at 12 to keep the enumeration bounded.
std::vector<Mask> enumerate_candidates(int length, int features,
                                       const SpatialPartition& partition,
                                       const MaskSettings& settings);

struct MaskSelection {
  Mask mask;
  double score = 0.0;
  int index = -1;                    // canonical candidate index
  std::vector<double> scores;        // per candidate, canonical order
};

// Evaluates F_C(G(z')) + R(G(z'), z') per candidate (forward only, parallel)
// and returns the argmin; ties resolve to the lower canonical index.
MaskSelection select_mask(const std::vector<Mask>& candidates,
                          const Tensor& z1, const Tensor& z2,
                          const ConstraintSet& full_set,
                          const RewardConfig& rewards, const Checkpoint& ck,
                          const Condition& cond, int workers = 0);

struct SoftBlendResult {
  Mask mask;
  double objective = 0.0;
  bool degraded = false;  // optimization went non-finite; input returned
};

// Reparameterizes the binary mask as sigmoid(logits) with +-4 logits and
// optimizes the logits on the same objective, keeping the best iterate.
// steps = 0 returns the sigmoid-valued mask unchanged.
SoftBlendResult soft_blend(const Mask& m, const Tensor& z1, const Tensor& z2,
                           const ConstraintSet& full_set,
                           const RewardConfig& rewards, const Checkpoint& ck,
                           const Condition& cond, int steps = 50,
                           double lr = 0.05);

}  // namespace rgdno
