#include "rgdno/motion.hpp"

#include <cmath>
#include <string>

#include "rgdno/errors.hpp"

namespace rgdno {

void Motion::validate() const {
  if (!frames.defined() || frames.rank() != 2 || frames.dim(1) != kFeatureDim) {
    throw ValidationError("motion: frames must be a {T,16} tensor");
  }
  if (frames.dim(0) < 2) {
    throw ValidationError("motion: needs at least 2 frames, got " +
                          std::to_string(frames.dim(0)));
  }
  assert_all_finite(frames, "motion frames");
}

Kinematics derive_kinematics(const Motion& m) {
  m.validate();
  const int T = m.length();
  if (T < 3) {
    throw ValidationError("derive_kinematics: needs at least 3 frames, got " +
                          std::to_string(T));
  }
  const double fps = m.frame_rate;
  const double* f = m.frames.data();
  Kinematics k;
  k.length = T;
  k.velocity.resize(static_cast<std::size_t>(T) * kFeatureDim);
  k.acceleration.resize(static_cast<std::size_t>(T) * kFeatureDim);

  auto v = [&](int t, int c) -> double& {
    return k.velocity[static_cast<std::size_t>(t) * kFeatureDim + c];
  };
  auto a = [&](int t, int c) -> double& {
    return k.acceleration[static_cast<std::size_t>(t) * kFeatureDim + c];
  };
  auto x = [&](int t, int c) {
    return f[static_cast<std::size_t>(t) * kFeatureDim + c];
  };

  for (int c = 0; c < kFeatureDim; ++c) {
    v(0, c) = (x(1, c) - x(0, c)) * fps;
    v(T - 1, c) = (x(T - 1, c) - x(T - 2, c)) * fps;
    a(0, c) = (x(2, c) - 2.0 * x(1, c) + x(0, c)) * fps * fps;
    a(T - 1, c) = (x(T - 1, c) - 2.0 * x(T - 2, c) + x(T - 3, c)) * fps * fps;
    for (int t = 1; t + 1 < T; ++t) {
      v(t, c) = (x(t + 1, c) - x(t - 1, c)) * 0.5 * fps;
      a(t, c) = (x(t + 1, c) - 2.0 * x(t, c) + x(t - 1, c)) * fps * fps;
    }
  }

  k.contact_left.resize(static_cast<std::size_t>(T));
  k.contact_right.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    auto contact = [&](int foot) {
      const double h = x(t, foot + 1);
      const double speed =
          std::sqrt(v(t, foot) * v(t, foot) + v(t, foot + 1) * v(t, foot + 1) +
                    v(t, foot + 2) * v(t, foot + 2));
      return (h < kContactHeightM && speed < kContactSpeedMs) ? 1 : 0;
    };
    k.contact_left[static_cast<std::size_t>(t)] =
        static_cast<std::uint8_t>(contact(col::kLFoot));
    k.contact_right[static_cast<std::size_t>(t)] =
        static_cast<std::uint8_t>(contact(col::kRFoot));
  }
  return k;
}

std::vector<double> foot_horizontal_speed(const Motion& m, int foot_col,
                                          int smooth_window) {
  const int T = m.length();
  const double fps = m.frame_rate;
  const double* f = m.frames.data();
  auto x = [&](int t, int c) {
    return f[static_cast<std::size_t>(t) * kFeatureDim + c];
  };
  std::vector<double> speed(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const int tp = t + 1 < T ? t + 1 : t;
    const int tm = t > 0 ? t - 1 : t;
    const double scale = fps / static_cast<double>(tp - tm);
    const double vx = (x(tp, foot_col) - x(tm, foot_col)) * scale;
    const double vz = (x(tp, foot_col + 2) - x(tm, foot_col + 2)) * scale;
    speed[static_cast<std::size_t>(t)] = std::sqrt(vx * vx + vz * vz);
  }
  if (smooth_window <= 1) return speed;
  const int half = smooth_window / 2;
  std::vector<double> out(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    double acc = 0.0;
    int n = 0;
    for (int u = t - half; u <= t + half; ++u) {
      if (u >= 0 && u < T) {
        acc += speed[static_cast<std::size_t>(u)];
        ++n;
      }
    }
    out[static_cast<std::size_t>(t)] = acc / n;
  }
  return out;
}

}  // namespace rgdno
