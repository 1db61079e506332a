#pragma once

#include <cstdint>
#include <vector>

#include "rgdno/tensor.hpp"

namespace rgdno {

// Stick-agent frame layout: 16 features per frame, meters, world frame.
namespace col {
inline constexpr int kRootX = 0;
inline constexpr int kRootZ = 1;
inline constexpr int kPelvisY = 2;
inline constexpr int kHeadY = 3;
inline constexpr int kLFoot = 4;   // x,y,z
inline constexpr int kRFoot = 7;   // x,y,z
inline constexpr int kLHand = 10;  // x,y,z
inline constexpr int kRHand = 13;  // x,y,z
}  // namespace col

inline constexpr int kFeatureDim = 16;
inline constexpr double kFrameRate = 20.0;
inline constexpr double kShoulderHalfWidth = 0.2;  // body extent proxy
// Foot contact thresholds: height per the standard 0.025 m convention, the
// speed cutoff is a calibration of this artifact.
inline constexpr double kContactHeightM = 0.025;
inline constexpr double kContactSpeedMs = 0.05;

// A trajectory of stick-agent frames at a fixed frame rate.
struct Motion {
  Tensor frames;  // {T, 16}
  double frame_rate = kFrameRate;

  int length() const { return frames.defined() ? frames.dim(0) : 0; }
  double at(int frame, int feature) const { return frames.at(frame, feature); }

  // T >= 2, feature dim 16, all values finite.
  void validate() const;
};

// Finite-difference kinematics on plain doubles (central at interior frames,
// one-sided at the ends). Not part of any gradient path; the differentiable
// constraint losses rebuild what they need from tensor ops.
struct Kinematics {
  int length = 0;
  std::vector<double> velocity;      // {T*16}, m/s
  std::vector<double> acceleration;  // {T*16}, m/s^2
  std::vector<std::uint8_t> contact_left;   // per frame
  std::vector<std::uint8_t> contact_right;  // per frame

  double vel(int frame, int feature) const {
    return velocity[static_cast<std::size_t>(frame) * kFeatureDim + feature];
  }
  double acc(int frame, int feature) const {
    return acceleration[static_cast<std::size_t>(frame) * kFeatureDim + feature];
  }
};

// Requires T >= 3. Contact label = (foot_y < 0.025 m) and (foot speed <
// 0.05 m/s).
Kinematics derive_kinematics(const Motion& m);

// Horizontal foot speed per frame (m/s), optionally box-smoothed over
// `smooth_window` frames. foot_col is col::kLFoot or col::kRFoot.
std::vector<double> foot_horizontal_speed(const Motion& m, int foot_col,
                                          int smooth_window = 1);

}  // namespace rgdno
