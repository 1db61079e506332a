#include "rgdno/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rgdno/corpus.hpp"
#include "rgdno/errors.hpp"

namespace rgdno {

namespace {

struct KindName {
  ConstraintKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {ConstraintKind::kNarrowGap, "narrow_gap"},
    {ConstraintKind::kOverheadBarrier, "overhead_barrier"},
    {ConstraintKind::kTargetPos, "target_pos"},
    {ConstraintKind::kGroundContactEnds, "ground_contact_ends"},
    {ConstraintKind::kPelvisHeightAt, "pelvis_height_at"},
    {ConstraintKind::kSelfCollisionMinDist, "self_collision_min_dist"},
    {ConstraintKind::kStepCount, "step_count"},
    {ConstraintKind::kClapCount, "clap_count"},
    {ConstraintKind::kClapWide, "clap_wide"},
    {ConstraintKind::kReachHigh, "reach_high"},
};

int joint_base_col(const std::string& joint) {
  if (joint == "root") return col::kRootX;
  if (joint == "pelvis") return col::kPelvisY;
  if (joint == "head") return col::kHeadY;
  if (joint == "lfoot") return col::kLFoot;
  if (joint == "rfoot") return col::kRFoot;
  if (joint == "lhand") return col::kLHand;
  if (joint == "rhand") return col::kRHand;
  throw ValidationError("constraint: unknown joint '" + joint + "'");
}

Tensor column(const Tensor& f, int c) { return slice(f, 1, c, 1); }

Tensor hinge_sq(const Tensor& x, double sharpness) {
  return square(hinge(x, sharpness));
}

// Per-axis world position of a named joint, {T,1}. Axis: 0=x, 1=y, 2=z.
// The root has no y; pelvis/head are heights only.
Tensor joint_axis(const Tensor& f, const std::string& joint, int axis) {
  if (joint == "root") {
    if (axis == 0) return column(f, col::kRootX);
    if (axis == 2) return column(f, col::kRootZ);
    throw ValidationError("constraint: root has no y coordinate");
  }
  if (joint == "pelvis" || joint == "head") {
    if (axis == 1) {
      return column(f, joint == "pelvis" ? col::kPelvisY : col::kHeadY);
    }
    // Horizontal position of the body column follows the root.
    if (axis == 0) return column(f, col::kRootX);
    return column(f, col::kRootZ);
  }
  return column(f, joint_base_col(joint) + axis);
}

Tensor frame_rows(const Tensor& t, int frame) { return slice(t, 0, frame, 1); }

// Central differences inside, one-sided at the ends; {T,1} per component.
Tensor column_velocity(const Tensor& f, int c, double fps) {
  const int T = f.dim(0);
  auto x = column(f, c);  // {T,1}
  auto first = (slice(x, 0, 1, 1) - slice(x, 0, 0, 1)) * fps;
  auto last = (slice(x, 0, T - 1, 1) - slice(x, 0, T - 2, 1)) * fps;
  auto interior = (slice(x, 0, 2, T - 2) - slice(x, 0, 0, T - 2)) * (0.5 * fps);
  return concat({first, interior, last}, 0);
}

Tensor inter_hand_distance(const Tensor& f) {
  auto dx = column(f, col::kRHand) - column(f, col::kLHand);
  auto dy = column(f, col::kRHand + 1) - column(f, col::kLHand + 1);
  auto dz = column(f, col::kRHand + 2) - column(f, col::kLHand + 2);
  return rgdno::sqrt(square(dx) + square(dy) + square(dz) + 1e-12);
}

Tensor loss_narrow_gap(const ConstraintParams& p, const Tensor& f) {
  auto w = z_window(column(f, col::kRootZ), p.z_from, p.z_to, p.sharpness);
  auto root_x = column(f, col::kRootX);

  // Shoulder line runs along the inter-hand axis, so a side-stepping agent
  // presents a narrow profile.
  auto hdx = column(f, col::kRHand) - column(f, col::kLHand);
  auto hdz = column(f, col::kRHand + 2) - column(f, col::kLHand + 2);
  auto hnorm = rgdno::sqrt(square(hdx) + square(hdz) + 1e-9);
  auto ux = hdx / hnorm;
  auto shoulder_r = root_x + ux * kShoulderHalfWidth;
  auto shoulder_l = root_x - ux * kShoulderHalfWidth;

  std::vector<Tensor> points = {root_x,
                                column(f, col::kLFoot),
                                column(f, col::kRFoot),
                                column(f, col::kLHand),
                                column(f, col::kRHand),
                                shoulder_l,
                                shoulder_r};
  Tensor total = Tensor::scalar(0.0);
  for (const auto& x : points) {
    auto pen = hinge_sq(x - p.half_width, p.sharpness) +
               hinge_sq(-1.0 * x - p.half_width, p.sharpness);
    total = total + sum(mul(w, pen));
  }
  return total;
}

Tensor loss_overhead_barrier(const ConstraintParams& p, const Tensor& f) {
  auto w = z_window(column(f, col::kRootZ), p.z_from, p.z_to, p.sharpness);
  std::vector<int> height_cols = {col::kPelvisY,    col::kHeadY,
                                  col::kLFoot + 1,  col::kRFoot + 1,
                                  col::kLHand + 1,  col::kRHand + 1};
  Tensor total = Tensor::scalar(0.0);
  for (int c : height_cols) {
    auto y = column(f, c);
    auto pen = hinge_sq(y - p.height, p.sharpness) +
               hinge_sq(-1.0 * y, p.sharpness);
    total = total + sum(mul(w, pen));
  }
  return total;
}

Tensor loss_target_pos(const ConstraintParams& p, const Tensor& f) {
  const int T = f.dim(0);
  std::vector<int> frames = p.frames;
  if (frames.empty()) frames = {T - 1};
  Tensor total = Tensor::scalar(0.0);
  for (int frame : frames) {
    auto add_axis = [&](int axis, double target) {
      auto pos = frame_rows(joint_axis(f, p.joint, axis), frame);
      total = total + sum(square(pos - target));
    };
    if (p.target_x) add_axis(0, *p.target_x);
    if (p.target_y) add_axis(1, *p.target_y);
    if (p.target_z) add_axis(2, *p.target_z);
  }
  return total;
}

Tensor loss_ground_contact_ends(const ConstraintParams& p, const Tensor& f,
                                double fps) {
  const int T = f.dim(0);
  const int n = std::min(p.end_frames, T / 2);
  Tensor total = Tensor::scalar(0.0);
  for (int foot : {col::kLFoot, col::kRFoot}) {
    auto y = column(f, foot + 1);
    total = total + sum(square(slice(y, 0, 0, n))) +
            sum(square(slice(y, 0, T - n, n)));
    if (p.zero_velocity && n >= 1) {
      for (int c = 0; c < 3; ++c) {
        auto x = column(f, foot + c);
        auto head_v = (slice(x, 0, 1, n) - slice(x, 0, 0, n)) * fps;
        auto tail_v =
            (slice(x, 0, T - n, n) - slice(x, 0, T - n - 1, n)) * fps;
        total = total + sum(square(head_v)) + sum(square(tail_v));
      }
    }
  }
  return total;
}

Tensor loss_pelvis_height_at(const ConstraintParams& p, const Tensor& f) {
  const int T = f.dim(0);
  std::vector<int> frames = p.frames;
  if (frames.empty()) frames = {T - 1};
  Tensor total = Tensor::scalar(0.0);
  for (int frame : frames) {
    auto y = frame_rows(column(f, col::kPelvisY), frame);
    total = total + sum(square(y - p.height));
  }
  return total;
}

Tensor loss_self_collision(const ConstraintParams& p, const Tensor& f) {
  auto rx = column(f, col::kRootX);
  auto rz = column(f, col::kRootZ);
  Tensor total = Tensor::scalar(0.0);
  for (int hand : {col::kLHand, col::kRHand}) {
    auto dx = column(f, hand) - rx;
    auto dz = column(f, hand + 2) - rz;
    auto d = rgdno::sqrt(square(dx) + square(dz) + 1e-12);
    total = total + sum(hinge_sq(p.min_dist - d, p.sharpness));
  }
  return total;
}

Tensor soft_step_count_both_feet(const ConstraintParams& p, const Tensor& f,
                                 double fps) {
  Tensor total = Tensor::scalar(0.0);
  for (int foot : {col::kLFoot, col::kRFoot}) {
    auto v = foot_speed_tensor(f, foot, fps, /*smooth3=*/true);
    total = total + soft_peak_count(v, p.theta_v, p.t_scale);
  }
  return total;
}

Tensor loss_step_count(const ConstraintParams& p, const Tensor& f,
                       double fps) {
  auto count = soft_step_count_both_feet(p, f, fps);
  return square(count - static_cast<double>(p.target_count));
}

Tensor loss_clap_count(const ConstraintParams& p, const Tensor& f) {
  auto d = reshape(inter_hand_distance(f), {f.dim(0)});
  auto count = soft_minima_count(d, p.theta_d, p.t_scale);
  return square(count - static_cast<double>(p.target_count));
}

Tensor loss_clap_wide(const ConstraintParams& p, const Tensor& f) {
  auto d = inter_hand_distance(f);
  // Soft max over frames (log-sum-exp), hinged against the required spread.
  const double temp = 0.05;
  auto m = max(d);
  auto lse = m + temp * rgdno::log(sum(rgdno::exp((d - m) / temp)));
  return hinge_sq(p.min_spread - lse, p.sharpness);
}

Tensor loss_reach_high(const ConstraintParams& p, const Tensor& f) {
  Tensor err;  // {T,1} squared distance to the target point
  bool first = true;
  auto accumulate = [&](int axis, double target) {
    auto term = square(joint_axis(f, p.joint, axis) - target);
    err = first ? term : err + term;
    first = false;
  };
  if (p.target_x) accumulate(0, *p.target_x);
  if (p.target_y) accumulate(1, *p.target_y);
  if (p.target_z) accumulate(2, *p.target_z);
  if (first) throw ValidationError("reach_high: no target axes given");

  // Boltzmann-weighted soft minimum over frames: smooth, stays within
  // [min, max] so a satisfied goal reads as ~0.
  const double tau = p.temperature;
  auto e_min = -1.0 * max(-1.0 * err);
  auto w = rgdno::exp((e_min - err) / tau);
  return sum(mul(err, w)) / sum(w);
}

}  // namespace

const char* constraint_kind_name(ConstraintKind kind) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "?";
}

ConstraintKind constraint_kind_from(const std::string& name) {
  for (const auto& kn : kKindNames) {
    if (name == kn.name) return kn.kind;
  }
  throw ValidationError("constraint: unknown kind '" + name + "'");
}

bool is_counting_kind(ConstraintKind kind) {
  return kind == ConstraintKind::kStepCount ||
         kind == ConstraintKind::kClapCount;
}

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::kConnected: return "connected";
    case Relation::kConflict: return "conflict";
    case Relation::kNone: return "none";
  }
  return "?";
}

Relation relation_from(const std::string& name) {
  if (name == "connected") return Relation::kConnected;
  if (name == "conflict") return Relation::kConflict;
  if (name == "none") return Relation::kNone;
  throw ValidationError("constraint: unknown relation '" + name + "'");
}

std::string Constraint::description() const {
  std::ostringstream os;
  os << constraint_kind_name(kind) << ": ";
  switch (kind) {
    case ConstraintKind::kNarrowGap:
      os << "keep every keypoint and the shoulder extent within |x| <= "
         << params.half_width << " m while root z is in [" << params.z_from
         << ", " << params.z_to << "]";
      break;
    case ConstraintKind::kOverheadBarrier:
      os << "keep every keypoint height within [0, " << params.height
         << "] m while root z is in [" << params.z_from << ", " << params.z_to
         << "]";
      break;
    case ConstraintKind::kTargetPos:
      os << "bring joint '" << params.joint << "' to the target position";
      if (params.target_x) os << " x=" << *params.target_x;
      if (params.target_y) os << " y=" << *params.target_y;
      if (params.target_z) os << " z=" << *params.target_z;
      os << (params.frames.empty() ? " at the final frame"
                                   : " at the given frames");
      break;
    case ConstraintKind::kGroundContactEnds:
      os << "keep both feet on the ground"
         << (params.zero_velocity ? " with zero velocity" : "")
         << " during the first and last " << params.end_frames << " frames";
      break;
    case ConstraintKind::kPelvisHeightAt:
      os << "pelvis height " << params.height << " m at the given frames";
      break;
    case ConstraintKind::kSelfCollisionMinDist:
      os << "keep both hands at least " << params.min_dist
         << " m from the torso axis";
      break;
    case ConstraintKind::kStepCount:
      os << "walk exactly " << params.target_count
         << " steps (soft peak count of foot speed, both feet)";
      break;
    case ConstraintKind::kClapCount:
      os << "clap exactly " << params.target_count
         << " times (soft minima count of the inter-hand distance)";
      break;
    case ConstraintKind::kClapWide:
      os << "open the hands at least " << params.min_spread
         << " m apart between claps";
      break;
    case ConstraintKind::kReachHigh:
      os << "joint '" << params.joint
         << "' reaches the target point at some frame";
      break;
  }
  return os.str();
}

const Constraint* ConstraintSet::find(const std::string& id) const {
  for (const auto& c : items) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

bool ConstraintSet::has_counting_constraint() const {
  for (const auto& c : items) {
    if (is_counting_kind(c.kind)) return true;
  }
  return false;
}

ConstraintSet ConstraintSet::with_items(std::vector<Constraint> subset) const {
  ConstraintSet out;
  out.items = std::move(subset);
  out.prompt_tags = prompt_tags;
  out.length = length;
  return out;
}

void ConstraintSet::validate() const {
  std::set<std::string> ids;
  for (const auto& c : items) {
    if (c.id.empty()) throw ValidationError("constraint set: empty id");
    if (!ids.insert(c.id).second) {
      throw ValidationError("constraint set: duplicate id '" + c.id + "'");
    }
    if (c.weight < 0.0) {
      throw ValidationError("constraint '" + c.id + "': negative weight");
    }
    if (c.difficulty && (*c.difficulty < 0.0 || *c.difficulty > 1.0)) {
      throw ValidationError("constraint '" + c.id +
                            "': difficulty outside [0,1]");
    }
    for (int frame : c.params.frames) {
      if (frame < 0 || frame >= length) {
        throw ValidationError("constraint '" + c.id + "': frame " +
                              std::to_string(frame) + " outside [0," +
                              std::to_string(length) + ")");
      }
    }
    if (c.params.z_from > c.params.z_to) {
      throw ValidationError("constraint '" + c.id + "': empty z window");
    }
  }
  for (const auto& c : items) {
    std::set<std::string> seen;
    for (const auto& [other, rel] : c.relations) {
      if (other == c.id) {
        throw ValidationError("constraint '" + c.id + "': self relation");
      }
      if (!ids.count(other)) {
        throw ValidationError("constraint '" + c.id +
                              "': relation references unknown id '" + other +
                              "'");
      }
      if (!seen.insert(other).second) {
        throw ValidationError("constraint '" + c.id +
                              "': duplicate relation edge to '" + other + "'");
      }
      (void)rel;
    }
  }
}

Tensor hinge(const Tensor& x, double sharpness) {
  return softplus(x * sharpness) / sharpness;
}

Tensor z_window(const Tensor& root_z, double z0, double z1, double sharpness) {
  return mul(sigmoid((root_z - z0) * sharpness),
             sigmoid((z1 - root_z) * sharpness));
}

Tensor soft_peak_count(const Tensor& signal, double threshold,
                       double t_scale) {
  const int n = signal.dim(0);
  if (n < 3) return Tensor::scalar(0.0);
  auto mid = slice(signal, 0, 1, n - 2);
  auto left = slice(signal, 0, 0, n - 2);
  auto right = slice(signal, 0, 2, n - 2);
  auto p = mul(mul(sigmoid((mid - right) * t_scale),
                   sigmoid((mid - left) * t_scale)),
               sigmoid((mid - threshold) * t_scale));
  return sum(p);
}

Tensor soft_minima_count(const Tensor& signal, double threshold,
                         double t_scale) {
  const int n = signal.dim(0);
  if (n < 3) return Tensor::scalar(0.0);
  auto mid = slice(signal, 0, 1, n - 2);
  auto left = slice(signal, 0, 0, n - 2);
  auto right = slice(signal, 0, 2, n - 2);
  auto p = mul(mul(sigmoid((right - mid) * t_scale),
                   sigmoid((left - mid) * t_scale)),
               sigmoid((threshold - mid) * t_scale));
  return sum(p);
}

Tensor foot_speed_tensor(const Tensor& frames_m, int foot_col,
                         double frame_rate, bool smooth3) {
  const int T = frames_m.dim(0);
  auto vx = column_velocity(frames_m, foot_col, frame_rate);
  auto vz = column_velocity(frames_m, foot_col + 2, frame_rate);
  auto speed = rgdno::sqrt(square(vx) + square(vz) + 1e-12);  // {T,1}
  auto flat = reshape(speed, {T});
  if (!smooth3 || T < 3) return flat;
  auto smoothed = (slice(flat, 0, 0, T - 2) + slice(flat, 0, 1, T - 2) +
                   slice(flat, 0, 2, T - 2)) /
                  3.0;
  auto first = slice(flat, 0, 0, 1);
  auto last = slice(flat, 0, T - 1, 1);
  return concat({first, smoothed, last}, 0);
}

Tensor single_constraint_loss(const Constraint& c, const Tensor& frames_m) {
  switch (c.kind) {
    case ConstraintKind::kNarrowGap:
      return loss_narrow_gap(c.params, frames_m);
    case ConstraintKind::kOverheadBarrier:
      return loss_overhead_barrier(c.params, frames_m);
    case ConstraintKind::kTargetPos:
      return loss_target_pos(c.params, frames_m);
    case ConstraintKind::kGroundContactEnds:
      return loss_ground_contact_ends(c.params, frames_m, kFrameRate);
    case ConstraintKind::kPelvisHeightAt:
      return loss_pelvis_height_at(c.params, frames_m);
    case ConstraintKind::kSelfCollisionMinDist:
      return loss_self_collision(c.params, frames_m);
    case ConstraintKind::kStepCount:
      return loss_step_count(c.params, frames_m, kFrameRate);
    case ConstraintKind::kClapCount:
      return loss_clap_count(c.params, frames_m);
    case ConstraintKind::kClapWide:
      return loss_clap_wide(c.params, frames_m);
    case ConstraintKind::kReachHigh:
      return loss_reach_high(c.params, frames_m);
  }
  throw ValidationError("constraint: unknown kind");
}

Tensor constraint_loss(const ConstraintSet& set, const Tensor& frames_m) {
  Tensor total = Tensor::scalar(0.0);
  for (const auto& c : set.items) {
    total = total + single_constraint_loss(c, frames_m) * c.weight;
  }
  return total;
}

Tensor constraint_loss_normalized(const ConstraintSet& set,
                                  const Tensor& frames_normalized,
                                  const std::vector<double>& mean,
                                  const std::vector<double>& stddev) {
  return constraint_loss(set,
                         denormalize_frames(frames_normalized, mean, stddev));
}

EvalBreakdown evaluate(const ConstraintSet& set, const Motion& m) {
  if (m.length() != set.length) {
    throw ValidationError("evaluate: motion length " +
                          std::to_string(m.length()) +
                          " does not match the set's target length " +
                          std::to_string(set.length));
  }
  NoGradGuard guard;
  EvalBreakdown out;
  for (const auto& c : set.items) {
    const double err = single_constraint_loss(c, m.frames).item();
    if (!std::isfinite(err)) {
      throw RuntimeFailure("evaluate: constraint '" + c.id +
                           "' produced a non-finite error");
    }
    out.per_constraint.emplace_back(c.id, err);
    out.total += c.weight * err;
  }
  return out;
}

}  // namespace rgdno
