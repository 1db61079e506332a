#include "rgdno/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "rgdno/errors.hpp"

namespace rgdno {

namespace {

struct KeypointGroup {
  int start;
  int count;
};

// root (x,z), pelvis y, head y, feet xyz, hands xyz.
constexpr KeypointGroup kKeypoints[] = {
    {col::kRootX, 2}, {col::kPelvisY, 1}, {col::kHeadY, 1}, {col::kLFoot, 3},
    {col::kRFoot, 3}, {col::kLHand, 3},   {col::kRHand, 3},
};

Tensor column(const Tensor& f, int c) { return slice(f, 1, c, 1); }

// Squared acceleration magnitude per keypoint, {T-2, n_keypoints}, in the
// requested time unit (per frame^2 or per second^2).
Tensor accel_sq_by_keypoint(const Tensor& frames, double time_scale) {
  const int T = frames.dim(0);
  auto a = (slice(frames, 0, 2, T - 2) - slice(frames, 0, 1, T - 2) * 2.0 +
            slice(frames, 0, 0, T - 2)) *
           (time_scale * time_scale);
  std::vector<Tensor> groups;
  for (const auto& kp : kKeypoints) {
    auto part = slice(a, 1, kp.start, kp.count);
    auto sq = square(part);
    Tensor acc = slice(sq, 1, 0, 1);
    for (int j = 1; j < kp.count; ++j) {
      acc = acc + slice(sq, 1, j, 1);
    }
    groups.push_back(acc);
  }
  return concat(groups, 1);  // {T-2, 7}
}

Tensor logsumexp(const Tensor& x, double temperature) {
  auto m = max(x);
  return m + temperature * rgdno::log(sum(rgdno::exp((x - m) / temperature)));
}

}  // namespace

RewardConfig RewardConfig::defaults() { return {1.0, 1.0, 1.0, 1.0, 1.3}; }

Tensor jitter_loss(const Tensor& frames_m, double frame_rate) {
  (void)frame_rate;
  if (frames_m.dim(0) < 3) return Tensor::scalar(0.0);
  // time_scale 1.0: per-frame acceleration units.
  auto a2 = accel_sq_by_keypoint(frames_m, 1.0);
  auto flat = reshape(a2, {a2.dim(0) * a2.dim(1)});
  return logsumexp(flat, 0.05);
}

Tensor footskate_loss(const Tensor& frames_m, double frame_rate) {
  const int T = frames_m.dim(0);
  Tensor num = Tensor::scalar(0.0);
  Tensor den = Tensor::scalar(1e-6);
  // Rectified ground: the lowest foot height seen in the sequence.
  auto lowest = -1.0 * max(-1.0 * concat({column(frames_m, col::kLFoot + 1),
                                          column(frames_m, col::kRFoot + 1)},
                                         0));
  for (int foot : {col::kLFoot, col::kRFoot}) {
    auto v = foot_speed_tensor(frames_m, foot, frame_rate, /*smooth3=*/false);
    auto y = reshape(column(frames_m, foot + 1), {T});
    auto w = sigmoid((kContactHeightM - (y - lowest)) * 400.0);
    num = num + sum(mul(w, square(v)));
    den = den + sum(w);
  }
  return num / den;
}

Tensor decorrelation_loss(const Tensor& z_prime) {
  const int n = static_cast<int>(z_prime.numel());
  auto z = reshape(z_prime, {n});
  auto mu = mean(z);
  auto centered = z - mu;
  auto c0 = sum(square(centered));
  Tensor loss = square(mu) + square(c0 / static_cast<double>(n) - 1.0);
  for (int lag = 1; lag <= 5 && lag < n; ++lag) {
    auto head = slice(centered, 0, 0, n - lag);
    auto tail = slice(centered, 0, lag, n - lag);
    auto rho = sum(mul(head, tail)) / (c0 + 1e-12);
    loss = loss + square(rho);
  }
  return loss;
}

Tensor semantic_hand_loss(const Tensor& frames_m, double required_height) {
  auto hands = concat({column(frames_m, col::kLHand + 1),
                       column(frames_m, col::kRHand + 1)},
                      0);
  auto highest = logsumexp(hands, 0.05);
  return square(hinge(required_height - highest, 50.0));
}

Tensor reward_loss(const Tensor& frames_m, const Tensor& z_prime,
                   const RewardConfig& cfg) {
  Tensor total = Tensor::scalar(0.0);
  if (cfg.lambda_jitter != 0.0) {
    total = total + jitter_loss(frames_m) * cfg.lambda_jitter;
  }
  if (cfg.lambda_footskate != 0.0) {
    total = total + footskate_loss(frames_m) * cfg.lambda_footskate;
  }
  if (cfg.lambda_decorr != 0.0) {
    total = total + decorrelation_loss(z_prime) * cfg.lambda_decorr;
  }
  if (cfg.lambda_semantic != 0.0) {
    total = total +
            semantic_hand_loss(frames_m, cfg.semantic_hand_height) *
                cfg.lambda_semantic;
  }
  return total;
}

namespace {

std::vector<int> falling_edges(const std::vector<double>& v, double theta) {
  std::vector<int> edges;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v[i] >= theta && v[i + 1] < theta) {
      edges.push_back(static_cast<int>(i));
    }
  }
  return edges;
}

}  // namespace

int discrete_step_count(const Motion& m, double theta_v) {
  return static_cast<int>(detected_step_events(m, theta_v).size());
}

std::vector<std::pair<int, int>> detected_step_events(const Motion& m,
                                                      double theta_v) {
  std::vector<std::pair<int, int>> events;
  for (int foot = 0; foot < 2; ++foot) {
    auto v = foot_horizontal_speed(m, foot == 0 ? col::kLFoot : col::kRFoot,
                                   /*smooth_window=*/3);
    for (int frame : falling_edges(v, theta_v)) {
      events.emplace_back(frame, foot);
    }
  }
  std::sort(events.begin(), events.end());
  return events;
}

int discrete_clap_count(const Motion& m, double theta_d) {
  const int T = m.length();
  std::vector<double> d(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const double dx = m.at(t, col::kRHand) - m.at(t, col::kLHand);
    const double dy = m.at(t, col::kRHand + 1) - m.at(t, col::kLHand + 1);
    const double dz = m.at(t, col::kRHand + 2) - m.at(t, col::kLHand + 2);
    d[static_cast<std::size_t>(t)] = std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  int count = 0;
  for (int t = 1; t + 1 < T; ++t) {
    if (d[t] < d[t - 1] && d[t] < d[t + 1] && d[t] < theta_d) ++count;
  }
  return count;
}

MetricsReport compute_metrics(const Motion& m, const ConstraintSet& set,
                              std::optional<std::array<double, 2>> local_window) {
  MetricsReport r;
  const int T = m.length();
  auto k = derive_kinematics(m);

  // Foot skate: absolute ground for the global ratio, rectified ground for
  // the local one.
  double lowest = 1e9;
  for (int t = 0; t < T; ++t) {
    lowest = std::min({lowest, m.at(t, col::kLFoot + 1),
                       m.at(t, col::kRFoot + 1)});
  }
  int eligible = 0, skating = 0, local_eligible = 0, local_skating = 0;
  for (int foot : {col::kLFoot, col::kRFoot}) {
    auto speed = foot_horizontal_speed(m, foot, 1);
    for (int t = 0; t < T; ++t) {
      const double y = m.at(t, foot + 1);
      const bool skate = speed[static_cast<std::size_t>(t)] > kContactSpeedMs;
      if (y < kContactHeightM) {
        ++eligible;
        if (skate) ++skating;
      }
      const bool in_window =
          !local_window || (m.at(t, col::kRootZ) >= (*local_window)[0] &&
                            m.at(t, col::kRootZ) <= (*local_window)[1]);
      if (in_window && y - lowest < kContactHeightM) {
        ++local_eligible;
        if (skate) ++local_skating;
      }
    }
  }
  r.foot_skate_ratio = eligible ? static_cast<double>(skating) / eligible : 0.0;
  r.local_foot_skate =
      local_eligible ? static_cast<double>(local_skating) / local_eligible : 0.0;

  // Max acceleration magnitude over keypoints (m/s^2).
  for (int t = 0; t < T; ++t) {
    for (const auto& kp : kKeypoints) {
      double mag_sq = 0.0;
      for (int j = 0; j < kp.count; ++j) {
        const double a = k.acc(t, kp.start + j);
        mag_sq += a * a;
      }
      r.max_acceleration = std::max(r.max_acceleration, std::sqrt(mag_sq));
    }
  }

  if (!set.items.empty()) {
    auto eval = evaluate(set, m);
    r.constraint_error = eval.total;
    r.constraint_breakdown = std::move(eval.per_constraint);
  }

  // Scene penetration from the task geometry (discrete, meters).
  for (const auto& c : set.items) {
    if (c.kind == ConstraintKind::kNarrowGap) {
      double left = 0.0, right = 0.0;
      for (int t = 0; t < T; ++t) {
        const double z = m.at(t, col::kRootZ);
        if (z < c.params.z_from || z > c.params.z_to) continue;
        const double hx =
            m.at(t, col::kRHand) - m.at(t, col::kLHand);
        const double hz =
            m.at(t, col::kRHand + 2) - m.at(t, col::kLHand + 2);
        const double norm = std::sqrt(hx * hx + hz * hz) + 1e-9;
        const double sx = kShoulderHalfWidth * hx / norm;
        const double root_x = m.at(t, col::kRootX);
        const double xs[] = {root_x,
                             m.at(t, col::kLFoot),
                             m.at(t, col::kRFoot),
                             m.at(t, col::kLHand),
                             m.at(t, col::kRHand),
                             root_x - sx,
                             root_x + sx};
        for (double x : xs) {
          right = std::max(right, x - c.params.half_width);
          left = std::max(left, -x - c.params.half_width);
        }
      }
      r.max_scene_penetration += left + right;
    } else if (c.kind == ConstraintKind::kOverheadBarrier) {
      double barrier = 0.0, ground = 0.0;
      for (int t = 0; t < T; ++t) {
        const double z = m.at(t, col::kRootZ);
        if (z < c.params.z_from || z > c.params.z_to) continue;
        for (int cidx : {col::kPelvisY, col::kHeadY, col::kLFoot + 1,
                         col::kRFoot + 1, col::kLHand + 1, col::kRHand + 1}) {
          const double y = m.at(t, cidx);
          barrier = std::max(barrier, y - c.params.height);
          ground = std::max(ground, -y);
        }
      }
      r.max_scene_penetration += barrier + ground;
    }
  }

  // Counting metrics.
  auto events = detected_step_events(m);
  r.detected_steps = static_cast<int>(events.size());
  r.detected_claps = discrete_clap_count(m);
  int step_target = -1;
  for (const auto& c : set.items) {
    if (c.kind == ConstraintKind::kStepCount) step_target = c.params.target_count;
  }
  r.step_success = (step_target >= 0 && r.detected_steps == step_target) ? 1.0 : 0.0;

  bool hand_above_shoulder = false;
  for (int t = 0; t < T; ++t) {
    const double pelvis = m.at(t, col::kPelvisY);
    const double shoulder = pelvis + 0.55 * (m.at(t, col::kHeadY) - pelvis);
    const double hand =
        std::max(m.at(t, col::kLHand + 1), m.at(t, col::kRHand + 1));
    hand_above_shoulder = hand_above_shoulder || hand > shoulder;
  }
  r.semantic_success = (r.step_success > 0.0 && hand_above_shoulder) ? 1.0 : 0.0;

  if (events.size() >= 2) {
    int alternating = 0;
    for (std::size_t i = 1; i < events.size(); ++i) {
      if (events[i].second != events[i - 1].second) ++alternating;
    }
    r.pace_score =
        static_cast<double>(alternating) / static_cast<double>(events.size() - 1);
  } else {
    r.pace_score = 1.0;
  }
  return r;
}

}  // namespace rgdno
