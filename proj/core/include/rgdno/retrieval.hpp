#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rgdno/constraints.hpp"
#include "rgdno/corpus.hpp"
#include "rgdno/motion.hpp"

namespace rgdno {

// Yaw about the vertical axis plus horizontal translation; rigid in the
// plane, heights untouched.
struct HorizontalTransform {
  double yaw = 0.0;  // radians, [-pi, pi)
  double tx = 0.0;
  double tz = 0.0;
};

Motion apply_transform(const Motion& m, const HorizontalTransform& h);

struct RetrievalSettings {
  int confidence = 1;  // user-declared retrieval confidence s
  int top_k = 5;
  // Absolute error cutoff; when absent, hits within 10x of the best error
  // are kept (the best hit always qualifies).
  std::optional<double> error_threshold;
  double secondary_weight_scale = 0.1;  // non-difficult constraints in C_R
  std::string selection = "rank0";      // or "random" among the kept hits
  int coarse_angles = 16;
  int refine_steps = 50;
  double refine_lr = 0.05;
};

struct RetrievalHit {
  int corpus_index = -1;
  std::string id;
  HorizontalTransform transform;
  double error = 0.0;
  int rank = -1;
};

struct RetrievalReport {
  std::vector<RetrievalHit> hits;  // sorted by error, at most top_k
  bool confident = true;           // false when nothing passed the threshold
  int candidates_after_filter = 0;
  int corpus_size = 0;
  int selected = 0;  // index into hits
};

// Keyword-compliance filter: drops samples with direction tags that
// contradict the prompt, and requires the matching action tag when the task
// carries a counting constraint. Returns corpus indices.
std::vector<int> semantic_filter(const Corpus& corpus,
                                 const std::vector<std::string>& prompt_tags,
                                 const ConstraintSet& task);

// Per-feature linear interpolation on the normalized time axis; endpoints
// are preserved exactly.
Motion resize(const Motion& m, int target_length);

// Best horizontal transform for the retrieval error: a coarse yaw grid,
// each angle refined by gradient steps on (yaw, tx, tz) through the
// differentiable constraint loss. Never worse than the identity transform.
std::pair<HorizontalTransform, double> fit_transform(
    const Motion& m, const ConstraintSet& retrieval_set,
    const RetrievalSettings& settings = {});

// Scales every constraint except `difficult_id` by secondary_weight_scale,
// so the hardest constraint dominates the retrieval error.
ConstraintSet retrieval_weighted(const ConstraintSet& retrieval_set,
                                 const std::string& difficult_id,
                                 double scale);

// Filter -> resize -> fit per candidate (parallel), threshold, top-k.
RetrievalReport retrieve(const Corpus& corpus,
                         const ConstraintSet& retrieval_set,
                         const std::string& difficult_id,
                         const std::vector<std::string>& prompt_tags,
                         int target_length,
                         const RetrievalSettings& settings = {},
                         std::uint64_t selection_seed = 0);

}  // namespace rgdno
