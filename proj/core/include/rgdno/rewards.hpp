#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rgdno/constraints.hpp"
#include "rgdno/motion.hpp"
#include "rgdno/tensor.hpp"

namespace rgdno {

// Weights of the motion-quality reward used during mask selection and soft
// blending. Presets mirror the per-task choices: task-1 leans on foot skate,
// task-2 on smoothness, task-3 on skate plus the hand-raise indicator.
struct RewardConfig {
  double lambda_jitter = 1.0;
  double lambda_footskate = 1.0;
  double lambda_decorr = 1.0;
  double lambda_semantic = 0.0;
  double semantic_hand_height = 1.3;  // required raised-hand height, m

  static RewardConfig defaults();  // all four at 1.0
  static RewardConfig task1() { return {1.0, 10.0, 1.0, 0.0, 1.3}; }
  static RewardConfig task2() { return {1.0, 0.0, 1.0, 0.0, 1.3}; }
  static RewardConfig task3() { return {0.0, 1.0, 0.0, 0.5, 1.3}; }
};

// Soft-max (temperature 0.05) over frames and keypoints of squared
// acceleration. Acceleration is measured per frame^2 here so the term stays
// commensurate with constraint errors; the SI metric lives in MetricsReport.
Tensor jitter_loss(const Tensor& frames_m, double frame_rate = kFrameRate);

// Mean squared horizontal foot speed over contact frames, with the ground
// rectified to the lowest foot height in the sequence.
Tensor footskate_loss(const Tensor& frames_m, double frame_rate = kFrameRate);

// Lag 1..5 autocorrelations squared plus moment matching of the blended
// noise against N(0, I).
Tensor decorrelation_loss(const Tensor& z_prime);

// Smooth hinge on (required height - max hand height), squared.
Tensor semantic_hand_loss(const Tensor& frames_m, double required_height);

// Aggregated reward R(G(z'), z') for a candidate blend.
Tensor reward_loss(const Tensor& frames_m, const Tensor& z_prime,
                   const RewardConfig& cfg);

struct MetricsReport {
  double foot_skate_ratio = 0.0;
  double local_foot_skate = 0.0;
  double max_acceleration = 0.0;  // m/s^2
  double constraint_error = 0.0;  // weighted total
  std::vector<std::pair<std::string, double>> constraint_breakdown;
  double max_scene_penetration = 0.0;
  double step_success = 0.0;
  double semantic_success = 0.0;
  double pace_score = 1.0;
  int detected_steps = 0;
  int detected_claps = 0;
};

// Discrete step counter: threshold-crossing falling edges of the smoothed
// horizontal foot speed, both feet. Independent of the soft counters.
int discrete_step_count(const Motion& m, double theta_v = 0.1);
// Steps as (frame, foot) pairs, foot 0 = left.
std::vector<std::pair<int, int>> detected_step_events(const Motion& m,
                                                      double theta_v = 0.1);
// Discrete clap counter: strict minima of the inter-hand distance below the
// threshold.
int discrete_clap_count(const Motion& m, double theta_d = 0.05);

// local_window gates local_foot_skate on root z; when absent the local
// ratio equals the global one.
MetricsReport compute_metrics(const Motion& m, const ConstraintSet& set,
                              std::optional<std::array<double, 2>> local_window =
                                  std::nullopt);

}  // namespace rgdno
