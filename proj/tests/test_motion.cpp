#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "rgdno/corpus.hpp"
#include "rgdno/errors.hpp"
#include "rgdno/gait.hpp"
#include "rgdno/motion.hpp"

using namespace rgdno;

namespace {

Motion constant_motion(int T, double fill) {
  Motion m;
  m.frames = Tensor::full({T, kFeatureDim}, fill);
  return m;
}

}  // namespace

TEST_CASE("constant motion has zero velocity and acceleration") {
  auto m = constant_motion(10, 0.4);
  auto k = derive_kinematics(m);
  for (int t = 0; t < 10; ++t) {
    for (int c = 0; c < kFeatureDim; ++c) {
      CHECK(k.vel(t, c) == 0.0);
      CHECK(k.acc(t, c) == 0.0);
    }
  }
}

TEST_CASE("linear root motion gives 1 m/s at interior frames") {
  Motion m;
  m.frames = Tensor::zeros({20, kFeatureDim});
  for (int t = 0; t < 20; ++t) {
    m.frames.data()[t * kFeatureDim + col::kRootX] = 0.05 * t;
  }
  auto k = derive_kinematics(m);
  for (int t = 1; t < 19; ++t) {
    CHECK(k.vel(t, col::kRootX) == doctest::Approx(1.0));
    CHECK(k.acc(t, col::kRootX) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("too short motion is rejected") {
  CHECK_THROWS_AS(derive_kinematics(constant_motion(2, 0.0)), ValidationError);
}

TEST_CASE("pinned foot frames are labeled as contact") {
  Motion m;
  m.frames = Tensor::zeros({30, kFeatureDim});
  double* f = m.frames.data();
  for (int t = 0; t < 30; ++t) {
    f[t * kFeatureDim + col::kPelvisY] = 0.9;
    f[t * kFeatureDim + col::kHeadY] = 1.6;
    // left foot airborne and moving outside frames 10..20
    const bool pinned = t >= 10 && t <= 20;
    f[t * kFeatureDim + col::kLFoot + 1] = pinned ? 0.0 : 0.2;
    f[t * kFeatureDim + col::kLFoot + 2] = pinned ? 0.5 : 0.05 * t;
  }
  auto k = derive_kinematics(m);
  for (int t = 12; t <= 18; ++t) CHECK(k.contact_left[t] == 1);
  for (int t = 0; t < 9; ++t) CHECK(k.contact_left[t] == 0);
}

TEST_CASE("forward gait covers speed * time") {
  GaitParams p;
  p.style = GaitStyle::kForward;
  p.speed = 1.0;
  p.step_frequency = 2.0;
  p.stride = 0.5;
  p.duration = 60;
  auto s = generate_gait(p, 42);
  const double dz = s.motion.at(59, col::kRootZ) - s.motion.at(0, col::kRootZ);
  CHECK(dz == doctest::Approx(3.0).epsilon(0.034));
  CHECK(s.has_tag("walk_forward"));
}

TEST_CASE("crouch gait stays below the configured ceiling") {
  GaitParams p;
  p.style = GaitStyle::kCrouch;
  p.speed = 0.7;
  p.step_frequency = 1.8;
  p.stride = 0.7 / 1.8;
  p.crouch_height = 0.5;
  auto s = generate_gait(p, 7);
  double max_head = 0.0;
  for (int t = 0; t < s.motion.length(); ++t) {
    max_head = std::max(max_head, s.motion.at(t, col::kHeadY));
  }
  CHECK(max_head <= 0.5);
  CHECK(s.has_tag("crouch"));
}

TEST_CASE("clap overlay produces exactly n inter-hand distance minima") {
  GaitParams p;
  p.overlays.clap_count = 4;
  auto s = generate_gait(p, 3);
  std::vector<double> d(s.motion.length());
  for (int t = 0; t < s.motion.length(); ++t) {
    const double dx = s.motion.at(t, col::kRHand) - s.motion.at(t, col::kLHand);
    const double dy =
        s.motion.at(t, col::kRHand + 1) - s.motion.at(t, col::kLHand + 1);
    const double dz =
        s.motion.at(t, col::kRHand + 2) - s.motion.at(t, col::kLHand + 2);
    d[t] = std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  CHECK(oracle::count_minima_below(d, 0.05) == 4);
  CHECK(s.has_tag("clap"));
}

TEST_CASE("raise hand overlay lifts a hand above the head") {
  GaitParams p;
  p.overlays.raise_hand_frame = 20;
  auto s = generate_gait(p, 11);
  bool above = false;
  for (int t = 0; t < s.motion.length(); ++t) {
    above = above ||
            s.motion.at(t, col::kRHand + 1) > s.motion.at(t, col::kHeadY);
  }
  CHECK(above);
  CHECK(s.has_tag("raise_hand"));
}

TEST_CASE("stance feet are pinned exactly") {
  GaitParams p;
  auto s = generate_gait(p, 5);
  auto k = derive_kinematics(s.motion);
  const int T = s.motion.length();
  for (int foot : {col::kLFoot, col::kRFoot}) {
    for (int t = 1; t < T; ++t) {
      const bool contact_pair =
          (foot == col::kLFoot ? k.contact_left[t] && k.contact_left[t - 1]
                               : k.contact_right[t] && k.contact_right[t - 1]);
      if (!contact_pair) continue;
      for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(s.motion.at(t, foot + c) -
                       s.motion.at(t - 1, foot + c)) < 1e-6);
      }
    }
  }
}

TEST_CASE("inconsistent stride/frequency/speed is an error") {
  GaitParams p;
  p.speed = 1.0;
  p.step_frequency = 2.0;
  p.stride = 0.3;  // implies 0.6 m/s, 40% off
  CHECK_THROWS_AS(generate_gait(p, 1), ValidationError);
}

TEST_CASE("gait generation is deterministic") {
  GaitParams p;
  p.style = GaitStyle::kDuckUnder;
  p.crouch_height = 0.5;
  auto a = generate_gait(p, 123);
  auto b = generate_gait(p, 123);
  CHECK(a.motion.frames.values() == b.motion.frames.values());
  CHECK(a.text == b.text);
}

TEST_CASE("corpus generation, tags, stats and round trip") {
  CorpusRecipe recipe = CorpusRecipe::standard();
  recipe.count = 300;
  auto corpus = build_corpus(recipe, 99);
  REQUIRE(corpus.size() == 300);

  // Every vocabulary tag shows up at this scale.
  for (const auto& tag : tag_vocabulary()) {
    INFO("tag ", tag);
    CHECK(corpus.count_tag(tag) >= 8);
  }

  // Normalization: (x - mean)/std has mean ~0 and std ~1 per feature.
  std::vector<double> sum(kFeatureDim, 0.0), sq(kFeatureDim, 0.0);
  std::int64_t n = 0;
  for (const auto& s : corpus.samples) {
    auto normed = normalize_frames(s.motion.frames, corpus.norm_mean,
                                   corpus.norm_std);
    const double* f = normed.data();
    for (int t = 0; t < s.motion.length(); ++t, ++n) {
      for (int c = 0; c < kFeatureDim; ++c) {
        sum[c] += f[t * kFeatureDim + c];
        sq[c] += f[t * kFeatureDim + c] * f[t * kFeatureDim + c];
      }
    }
  }
  for (int c = 0; c < kFeatureDim; ++c) {
    const double mean = sum[c] / n;
    const double stddev = std::sqrt(sq[c] / n - mean * mean);
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(stddev - 1.0) < 1e-9);
  }

  // Generator guarantees on every sample.
  for (const auto& s : corpus.samples) {
    double min_y = 1e9;
    for (int t = 0; t < s.motion.length(); ++t) {
      CHECK(s.motion.at(t, col::kHeadY) >= s.motion.at(t, col::kPelvisY));
      for (int c : {col::kPelvisY, col::kHeadY, col::kLFoot + 1,
                    col::kRFoot + 1, col::kLHand + 1, col::kRHand + 1}) {
        min_y = std::min(min_y, s.motion.at(t, c));
      }
    }
    CHECK(min_y >= -0.01);
  }

  const std::string path =
      (std::filesystem::temp_directory_path() / "rgdno_corpus_test.jsonl")
          .string();
  save_corpus(corpus, path);
  auto loaded = load_corpus(path);
  REQUIRE(loaded.size() == corpus.size());
  CHECK(loaded.norm_mean == corpus.norm_mean);
  CHECK(loaded.norm_std == corpus.norm_std);
  bool all_equal = true;
  for (int i = 0; i < corpus.size(); ++i) {
    all_equal = all_equal && loaded.samples[i].motion.frames.values() ==
                                 corpus.samples[i].motion.frames.values();
    all_equal = all_equal && loaded.samples[i].tags == corpus.samples[i].tags;
  }
  CHECK(all_equal);
  std::filesystem::remove(path);
}

TEST_CASE("empty recipe is rejected") {
  CorpusRecipe recipe;
  CHECK_THROWS_AS(build_corpus(recipe, 1), ValidationError);
}
