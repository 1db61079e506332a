#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgdno/motion.hpp"

namespace rgdno {

enum class GaitStyle { kForward, kSide, kCrouch, kCrawl, kDuckUnder };

const char* gait_style_name(GaitStyle s);

struct Overlays {
  int raise_hand_frame = -1;  // start frame of the raise window, -1 = none
  int raise_hand_len = 16;
  int clap_count = 0;  // number of hand claps, 0 = none
};

struct GaitParams {
  GaitStyle style = GaitStyle::kForward;
  bool reversed = false;        // walk in -z (annotated "backwards")
  double speed = 1.0;           // m/s
  double step_frequency = 2.0;  // steps per second, both feet combined
  double stride = 0.5;          // m per step
  double crouch_height = 0.5;   // body ceiling for crouch/crawl/duck styles
  // Duck-under lowers the body while root_z is inside this window.
  double duck_z0 = 1.2;
  double duck_z1 = 1.8;
  Overlays overlays;
  int duration = 60;  // frames at 20 fps

  void validate() const;
};

struct AnnotatedSample {
  Motion motion;
  std::string text;
  std::vector<std::string> tags;
  std::string id;

  bool has_tag(const std::string& tag) const;
};

// Procedural alternating-foot gait. Stance feet are pinned exactly (zero
// displacement, y = 0); swing speed profiles produce one clean peak per
// step; overlays add a hand raise or exactly n inter-hand distance dips
// below 0.05 m. Deterministic in (params, seed).
AnnotatedSample generate_gait(const GaitParams& p, std::uint64_t seed);

// Steps the generator schedules for these params (whole swings only).
int planned_step_count(const GaitParams& p);

}  // namespace rgdno
