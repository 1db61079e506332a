#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rgdno/motion.hpp"
#include "rgdno/tensor.hpp"

namespace rgdno {

enum class ConstraintKind {
  kNarrowGap,
  kOverheadBarrier,
  kTargetPos,
  kGroundContactEnds,
  kPelvisHeightAt,
  kSelfCollisionMinDist,
  kStepCount,
  kClapCount,
  kClapWide,
  kReachHigh,
};

const char* constraint_kind_name(ConstraintKind kind);
ConstraintKind constraint_kind_from(const std::string& name);
// Kinds whose goal is a count rather than geometry.
bool is_counting_kind(ConstraintKind kind);

enum class Relation { kConnected, kConflict, kNone };
const char* relation_name(Relation r);
Relation relation_from(const std::string& name);

// Union of the parameters the library kinds understand; each kind reads its
// own subset. Geometry is in meters, world frame.
struct ConstraintParams {
  double half_width = 0.2;           // narrow_gap
  double height = 0.5;               // overhead_barrier
  double z_from = 0.0, z_to = 1.0;   // gating window on root z
  std::string joint = "pelvis";      // target_pos / reach_high
  std::vector<int> frames;           // target frames; empty = last frame
  std::optional<double> target_x, target_y, target_z;  // per-axis targets
  int end_frames = 2;                // ground_contact_ends
  bool zero_velocity = false;        // ground_contact_ends
  double min_dist = 0.2;             // self_collision_min_dist
  int target_count = 6;              // step_count / clap_count
  double theta_v = 0.1;              // step velocity threshold, m/s
  double theta_d = 0.05;             // clap distance threshold, m
  double t_scale = 10000.0;          // counter sigmoid scale
  double min_spread = 0.4;           // clap_wide
  double temperature = 0.01;         // reach_high soft-min
  double sharpness = 50.0;           // softplus hinge sharpness, 1/m
};

struct Constraint {
  std::string id;
  ConstraintKind kind = ConstraintKind::kTargetPos;
  ConstraintParams params;
  double weight = 1.0;
  std::optional<double> difficulty;  // in [0,1] when present
  std::vector<std::pair<std::string, Relation>> relations;

  std::string description() const;
};

struct ConstraintSet {
  std::vector<Constraint> items;
  std::vector<std::string> prompt_tags;  // optional text-condition stand-in
  int length = 60;                       // target frame count

  bool empty() const { return items.empty(); }
  int size() const { return static_cast<int>(items.size()); }
  const Constraint* find(const std::string& id) const;
  bool contains(const std::string& id) const { return find(id) != nullptr; }
  bool has_counting_constraint() const;
  ConstraintSet with_items(std::vector<Constraint> subset) const;

  // Unique ids, weights >= 0, frames within [0, length), relations
  // referencing existing ids and no contradictory duplicates.
  void validate() const;
};

// Unweighted differentiable error of one constraint; frames are {T,16} in
// meters.
Tensor single_constraint_loss(const Constraint& c, const Tensor& frames_m);

// Weighted sum over the set; empty set gives exactly 0.
Tensor constraint_loss(const ConstraintSet& set, const Tensor& frames_m);

// Same, but de-normalizing generator output into meters first (stats from
// the checkpoint); the de-normalization is on the gradient path.
Tensor constraint_loss_normalized(const ConstraintSet& set,
                                  const Tensor& frames_normalized,
                                  const std::vector<double>& mean,
                                  const std::vector<double>& stddev);

struct EvalBreakdown {
  double total = 0.0;  // weighted
  std::vector<std::pair<std::string, double>> per_constraint;  // unweighted
};

// Plain-number evaluation with per-constraint breakdown. Throws
// RuntimeFailure naming the constraint id on a non-finite term.
EvalBreakdown evaluate(const ConstraintSet& set, const Motion& m);

// Smooth hinge max(x, 0) built on softplus; hinge(x)^2 is the standard
// penetration penalty.
Tensor hinge(const Tensor& x, double sharpness);

// Smooth indicator of root_z inside [z0, z1], {T,1}.
Tensor z_window(const Tensor& root_z, double z0, double z1, double sharpness);

// Soft peak/minima counters on a {N} signal tensor (sigmoid triplets with
// scale t_scale).
Tensor soft_peak_count(const Tensor& signal, double threshold, double t_scale);
Tensor soft_minima_count(const Tensor& signal, double threshold,
                         double t_scale);

// Differentiable horizontal foot speed {T}, optionally 3-frame box smoothed.
Tensor foot_speed_tensor(const Tensor& frames_m, int foot_col,
                         double frame_rate, bool smooth3);

}  // namespace rgdno
