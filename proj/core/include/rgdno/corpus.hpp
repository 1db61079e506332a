#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgdno/gait.hpp"

namespace rgdno {

// Style mix and parameter ranges for procedural corpus generation. The
// defaults cover the whole tag vocabulary with healthy margins.
struct CorpusRecipe {
  int count = 2000;
  int duration = 60;

  struct StyleEntry {
    GaitStyle style = GaitStyle::kForward;
    double weight = 1.0;
    bool reversed = false;
    double speed_lo = 0.8, speed_hi = 1.3;
    double freq_lo = 1.6, freq_hi = 2.7;
    double crouch_lo = 0.5, crouch_hi = 0.95;
  };
  std::vector<StyleEntry> styles;

  double raise_hand_prob = 0.22;
  double clap_prob = 0.12;
  int clap_lo = 2, clap_hi = 4;

  static CorpusRecipe standard();

  void validate() const;
};

// Annotated motion dataset with per-feature normalization statistics.
struct Corpus {
  std::vector<AnnotatedSample> samples;
  std::vector<double> norm_mean;  // 16
  std::vector<double> norm_std;   // 16
  int duration = 60;

  int size() const { return static_cast<int>(samples.size()); }
  int count_tag(const std::string& tag) const;
};

// Full tag vocabulary, fixed order.
const std::vector<std::string>& tag_vocabulary();

Corpus build_corpus(const CorpusRecipe& recipe, std::uint64_t seed);

// Line-delimited text format: header record with version and normalization
// stats, then one record per sample. Doubles are written with shortest
// round-trip precision, so save/load round trips bit-exactly.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// (x - mean) / std applied per feature column; and its inverse. Plain-value
// helpers used when preparing data outside any gradient path.
Tensor normalize_frames(const Tensor& frames, const std::vector<double>& mean,
                        const std::vector<double>& stddev);
Tensor denormalize_frames(const Tensor& frames,
                          const std::vector<double>& mean,
                          const std::vector<double>& stddev);

}  // namespace rgdno
