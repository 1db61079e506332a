#include "rgdno/gait.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rgdno/errors.hpp"
#include "rgdno/rng.hpp"

namespace rgdno {

namespace {

constexpr double kTau = 2.0 * M_PI;

// Monotone ramp with zero slope at both ends; the swing-foot speed profile
// it induces has a single clean peak at the midpoint.
double ramp01(double w) {
  if (w <= 0.0) return 0.0;
  if (w >= 1.0) return 1.0;
  return w - std::sin(kTau * w) / kTau;
}

double bump01(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double s = std::sin(M_PI * u);
  return s * s;
}

struct Swing {
  int start = 0;     // first swing frame (foot still at old plant)
  int len = 0;       // frames from old plant to new plant
  double old_x = 0, old_z = 0;
  double new_x = 0, new_z = 0;
  double lift = 0.06;
};

struct FootTrack {
  std::vector<Swing> swings;

  // (x, y, z) at frame i. Stance frames reproduce the plant exactly.
  void eval(int i, double& x, double& y, double& z) const {
    const Swing* active = nullptr;
    const Swing* last_done = nullptr;
    for (const auto& s : swings) {
      if (i >= s.start && i <= s.start + s.len) {
        active = &s;
        break;
      }
      if (i > s.start + s.len) last_done = &s;
    }
    if (active) {
      const double u = static_cast<double>(i - active->start) / active->len;
      // Horizontal progress confined to the middle half of the swing, so
      // frames adjacent to the plants carry zero horizontal velocity.
      const double g = ramp01((u - 0.25) / 0.5);
      x = active->old_x + (active->new_x - active->old_x) * g;
      z = active->old_z + (active->new_z - active->old_z) * g;
      y = active->lift * std::sin(M_PI * u);
      if (i == active->start || i == active->start + active->len) y = 0.0;
      return;
    }
    const Swing* ref = last_done;
    if (ref) {
      x = ref->new_x;
      z = ref->new_z;
    } else if (!swings.empty()) {
      x = swings.front().old_x;
      z = swings.front().old_z;
    } else {
      x = 0.0;
      z = 0.0;
    }
    y = 0.0;
  }
};

struct StyleHeights {
  double pelvis = 0.9;
  double head = 1.6;
  double hand = 0.85;
};

StyleHeights style_heights(const GaitParams& p) {
  StyleHeights h;
  switch (p.style) {
    case GaitStyle::kForward:
    case GaitStyle::kSide:
    case GaitStyle::kDuckUnder:
      break;
    case GaitStyle::kCrouch:
      h.head = p.crouch_height;
      h.pelvis = 0.55 * p.crouch_height;
      h.hand = 0.5 * p.crouch_height;
      break;
    case GaitStyle::kCrawl:
      h.head = p.crouch_height;
      h.pelvis = 0.62 * p.crouch_height;
      h.hand = 0.06;
      break;
  }
  return h;
}

}  // namespace

const char* gait_style_name(GaitStyle s) {
  switch (s) {
    case GaitStyle::kForward: return "forward";
    case GaitStyle::kSide: return "side";
    case GaitStyle::kCrouch: return "crouch";
    case GaitStyle::kCrawl: return "crawl";
    case GaitStyle::kDuckUnder: return "duck_under";
  }
  return "?";
}

void GaitParams::validate() const {
  if (speed <= 0.0 || step_frequency <= 0.0 || stride <= 0.0) {
    throw ValidationError("gait: speed, step_frequency and stride must be > 0");
  }
  if (duration < 8) {
    throw ValidationError("gait: duration must be at least 8 frames");
  }
  const double implied = stride * step_frequency;
  if (std::abs(implied - speed) > 0.2 * speed) {
    throw ValidationError(
        "gait: unreachable, stride*frequency=" + std::to_string(implied) +
        " m/s deviates more than 20% from speed=" + std::to_string(speed));
  }
  const bool uses_crouch = style == GaitStyle::kCrouch ||
                           style == GaitStyle::kCrawl ||
                           style == GaitStyle::kDuckUnder;
  if (uses_crouch && (crouch_height < 0.3 || crouch_height > 1.0)) {
    throw ValidationError("gait: crouch_height must be in [0.3, 1.0] m");
  }
  if (overlays.raise_hand_frame >= duration) {
    throw ValidationError("gait: raise_hand_frame beyond duration");
  }
  if (overlays.clap_count < 0) {
    throw ValidationError("gait: negative clap count");
  }
  if (overlays.clap_count > 0) {
    // 9-frame clap windows tiled over the middle 60% of the sequence.
    const int span = static_cast<int>(0.6 * duration);
    if (overlays.clap_count * 9 > span) {
      throw ValidationError("gait: too many claps for the duration");
    }
  }
}

int planned_step_count(const GaitParams& p) {
  return static_cast<int>(
      std::floor(p.step_frequency * p.duration / kFrameRate + 0.5));
}

bool AnnotatedSample::has_tag(const std::string& tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

AnnotatedSample generate_gait(const GaitParams& p, std::uint64_t seed) {
  p.validate();
  Rng rng(seed);
  const int T = p.duration;
  const int n_steps = planned_step_count(p);
  const double dir = p.reversed ? -1.0 : 1.0;
  const double displacement = dir * n_steps * p.stride;
  const StyleHeights base = style_heights(p);

  auto root_z_at = [&](double frame) {
    return displacement * frame / (T - 1);
  };

  // Step schedule: n_steps swing windows tiled between lead/trail margins,
  // alternating feet, left first.
  const int margin = std::max(3, T / 15);
  const double window =
      n_steps > 0 ? static_cast<double>(T - 2 * margin) / n_steps : 0.0;
  int swing_len = 2 * static_cast<int>(0.3 * window);  // even
  swing_len = std::clamp(swing_len, 4, 10);
  const double hip = rng.uniform(0.08, 0.11);
  const double lift =
      std::min(0.1, std::max(0.06, 0.03 / std::sin(M_PI / swing_len) + 0.01));

  const bool sideways = p.style == GaitStyle::kSide;
  FootTrack feet[2];
  double plant_x[2], plant_z[2];
  // Side-stepping keeps the feet near the gap axis; other styles offset
  // them laterally by hip width.
  plant_x[0] = sideways ? -0.035 : -hip;
  plant_x[1] = sideways ? 0.035 : hip;
  plant_z[0] = root_z_at(0) + dir * 0.25 * p.stride;
  plant_z[1] = root_z_at(0) - dir * 0.25 * p.stride;

  for (int k = 0; k < n_steps; ++k) {
    const int foot = k % 2;
    Swing s;
    s.start = margin + static_cast<int>(std::floor(k * window + 0.5 * (window - swing_len)));
    s.len = swing_len;
    if (s.start + s.len > T - 2) s.start = T - 2 - s.len;
    if (s.start < 1) s.start = 1;
    s.old_x = plant_x[foot];
    s.old_z = plant_z[foot];
    s.new_x = plant_x[foot];
    s.new_z = root_z_at(s.start + s.len) + dir * 0.45 * p.stride;
    s.lift = lift;
    feet[foot].swings.push_back(s);
    plant_z[foot] = s.new_z;
  }

  // Hand rig: lateral offset, anti-phase swing along the travel axis.
  const double hand_lat = rng.uniform(0.23, 0.27);
  const double arm_amp =
      p.style == GaitStyle::kCrawl ? 0.06 : rng.uniform(0.08, 0.14);
  const double arm_phase = rng.uniform(0.0, kTau);
  const double cycles = std::max(1.0, n_steps / 2.0);
  const double sway_amp = rng.uniform(0.005, 0.015);
  const double sway_phase = rng.uniform(0.0, kTau);
  const double bob_amp = rng.uniform(0.008, 0.015);
  const double bob_phase = rng.uniform(0.0, kTau);

  // Clap schedule: odd windows centered so the inter-hand distance has one
  // strict minimum per clap.
  const int n_claps = p.overlays.clap_count;
  const int clap_w = 9;
  std::vector<int> clap_centers;
  for (int j = 0; j < n_claps; ++j) {
    clap_centers.push_back(static_cast<int>(
        std::floor(T * (0.2 + 0.6 * (j + 0.5) / n_claps) + 0.5)));
  }
  auto clap_bump = [&](int i) {
    double b = 0.0;
    for (int c : clap_centers) {
      const int start = c - clap_w / 2;
      if (i >= start && i < start + clap_w) {
        b = std::max(b, bump01(static_cast<double>(i - start) / (clap_w - 1)));
      }
    }
    return b;
  };

  const int raise_start = p.overlays.raise_hand_frame;
  const int raise_len = std::max(4, p.overlays.raise_hand_len);

  Tensor frames = Tensor::zeros({T, kFeatureDim});
  double* f = frames.data();
  auto put = [&](int t, int c, double v) {
    f[static_cast<std::size_t>(t) * kFeatureDim + c] = v;
  };

  for (int i = 0; i < T; ++i) {
    const double phase = kTau * cycles * i / T;
    const double rx = sway_amp * std::sin(phase + sway_phase);
    const double rz = root_z_at(i);
    const double dip = bob_amp * 0.5 * (1.0 + std::sin(2.0 * phase + bob_phase));

    double pelvis = base.pelvis - dip;
    double head = base.head - dip;
    double hand_y = base.hand - 0.5 * dip;
    if (p.style == GaitStyle::kDuckUnder) {
      // Cosine ramp into the duck window, fully low inside it.
      const double r = 0.35;
      double w = 0.0;
      if (rz >= p.duck_z0 && rz <= p.duck_z1) {
        w = 1.0;
      } else if (rz > p.duck_z0 - r && rz < p.duck_z0) {
        w = 0.5 * (1.0 - std::cos(M_PI * (rz - (p.duck_z0 - r)) / r));
      } else if (rz > p.duck_z1 && rz < p.duck_z1 + r) {
        w = 0.5 * (1.0 + std::cos(M_PI * (rz - p.duck_z1) / r));
      }
      const double duck_head = p.crouch_height - dip;
      const double duck_pelvis = 0.55 * p.crouch_height - dip;
      head = head + (duck_head - head) * w;
      pelvis = pelvis + (duck_pelvis - pelvis) * w;
      hand_y = hand_y + (0.5 * p.crouch_height - hand_y) * w;
    }

    put(i, col::kRootX, rx);
    put(i, col::kRootZ, rz);
    put(i, col::kPelvisY, pelvis);
    put(i, col::kHeadY, head);

    for (int foot = 0; foot < 2; ++foot) {
      double fx, fy, fz;
      feet[foot].eval(i, fx, fy, fz);
      const int base_col = foot == 0 ? col::kLFoot : col::kRFoot;
      put(i, base_col, fx);
      put(i, base_col + 1, fy);
      put(i, base_col + 2, fz);
    }

    const double b = clap_bump(i);
    const double lat = hand_lat * (1.0 - b) + 0.01 * b;
    const double swing_l = arm_amp * std::sin(phase + arm_phase) * (1.0 - b);
    const double swing_r = -arm_amp * std::sin(phase + arm_phase) * (1.0 - b);

    double lh[3], rh[3];
    if (sideways) {
      // Facing +x while travelling +z: hands sit fore/aft along z.
      lh[0] = rx + 0.25 * swing_l;
      lh[2] = rz - lat;
      rh[0] = rx + 0.25 * swing_r;
      rh[2] = rz + lat;
    } else if (p.style == GaitStyle::kCrawl) {
      lh[0] = rx - 0.15;
      lh[2] = rz + dir * (0.28 + swing_l);
      rh[0] = rx + 0.15;
      rh[2] = rz + dir * (0.28 + swing_r);
    } else {
      lh[0] = rx - lat;
      lh[2] = rz + dir * swing_l;
      rh[0] = rx + lat;
      rh[2] = rz + dir * swing_r;
    }
    if (p.style == GaitStyle::kCrawl) {
      lh[1] = hand_y + 0.03 * (0.5 + 0.5 * std::sin(phase + arm_phase));
      rh[1] = hand_y + 0.03 * (0.5 - 0.5 * std::sin(phase + arm_phase));
    } else {
      lh[1] = hand_y;
      rh[1] = hand_y;
    }

    if (raise_start >= 0 && i >= raise_start && i < raise_start + raise_len) {
      const double u = static_cast<double>(i - raise_start) / raise_len;
      rh[1] = rh[1] + (head + 0.25 - rh[1]) * bump01(u);
    }

    put(i, col::kLHand, lh[0]);
    put(i, col::kLHand + 1, lh[1]);
    put(i, col::kLHand + 2, lh[2]);
    put(i, col::kRHand, rh[0]);
    put(i, col::kRHand + 1, rh[1]);
    put(i, col::kRHand + 2, rh[2]);
  }

  AnnotatedSample sample;
  sample.motion.frames = frames;
  sample.motion.frame_rate = kFrameRate;

  switch (p.style) {
    case GaitStyle::kForward:
      sample.tags = {p.reversed ? "backwards" : "walk_forward"};
      sample.text = p.reversed ? "an agent walks backwards"
                               : "an agent walks forward";
      break;
    case GaitStyle::kSide:
      sample.tags = {"side_step"};
      sample.text = "an agent side-steps along the path";
      break;
    case GaitStyle::kCrouch:
      sample.tags = {"crouch", "walk_forward"};
      sample.text = "an agent walks forward in a low crouch";
      break;
    case GaitStyle::kCrawl:
      sample.tags = {"crawl"};
      sample.text = "an agent crawls forward close to the ground";
      break;
    case GaitStyle::kDuckUnder:
      sample.tags = {"duck_under", "crouch", "walk_forward"};
      sample.text = "an agent walks forward and ducks low mid-way";
      break;
  }
  if (raise_start >= 0) {
    sample.tags.push_back("raise_hand");
    sample.text += ", raising a hand";
  }
  if (n_claps > 0) {
    sample.tags.push_back("clap");
    sample.text += ", clapping " + std::to_string(n_claps) + " times";
  }
  return sample;
}

}  // namespace rgdno
