#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rgdno/diffusion.hpp"
#include "rgdno/mask.hpp"
#include "rgdno/parsing.hpp"
#include "rgdno/retrieval.hpp"
#include "rgdno/rewards.hpp"
#include "rgdno/task.hpp"

namespace rgdno {

enum class SolveMethod { kDno, kRgdno, kUnconstrained };
SolveMethod solve_method_from(const std::string& name);
const char* solve_method_name(SolveMethod m);

struct SolveOptions {
  std::uint64_t seed = 0;
  int noise_search_runs = 1;  // best-of-N initial noise search
  ParseStrategy strategy = ParseStrategy::kHeuristic;
  std::optional<Annotations> llm_annotations;  // pre-fetched when strategy=llm
  int inner_workers = 0;  // mask/retrieval parallelism; 0 = default
};

struct StageCurve {
  std::string name;
  std::vector<double> losses;
};

struct SolveTrace {
  std::string task_name;
  std::string task_json;  // full task spec, embedded for replay/plotting
  std::string method;
  std::uint64_t seed = 0;

  ParseResult parse;
  bool parsed = false;
  RetrievalReport retrieval;
  bool retrieval_used = false;
  bool retrieval_degenerate = false;  // empty corpus or nothing confident
  double inversion_rmse = 0.0;
  bool inversion_low_confidence = false;

  Mask mask;
  bool mask_used = false;
  double mask_score = 0.0;
  int mask_index = -1;
  std::vector<double> mask_candidate_scores;
  bool soft_blend_degraded = false;

  Tensor z0, z_r, z1, z2, z_prime, delta_z, final_noise;
  Tensor final_frames_m;  // {T,16}, meters

  std::vector<StageCurve> curves;
  double final_loss = 0.0;  // weighted constraint error of the result
  MetricsReport metrics;
  std::map<std::string, double> stage_seconds;
  double total_seconds = 0.0;

  Motion final_motion() const;
};

// Precomputed retrieval guidance, reusable across seeds of the same task
// when hit selection is deterministic.
struct RetrievalGuidance {
  RetrievalReport report;
  Tensor z_r;
  Tensor x_fitted_normalized;
  double inversion_rmse = 0.0;
  bool inversion_low_confidence = false;
  bool valid = false;
};

RetrievalGuidance prepare_retrieval(const TaskSpec& task, const Checkpoint& ck,
                                    const Corpus& corpus,
                                    const ParseResult& parse,
                                    std::uint64_t selection_seed = 0);

// Single-stage baseline: optimize random noise against the full constraint
// set (500 steps at lr 0.05 by default).
SolveTrace solve_dno(const TaskSpec& task, const Checkpoint& ck,
                     const SolveOptions& options);

// No optimization: sample the prior and report metrics.
SolveTrace solve_unconstrained(const TaskSpec& task, const Checkpoint& ck,
                               const SolveOptions& options);

// Full retrieval-guided procedure: parse, retrieve + invert, fit z1/z2,
// mask select + soft blend, then the final residual round. A missing or
// unconfident retrieval degrades to the random-noise path (s forced to 0)
// and is flagged on the trace.
SolveTrace solve_rgdno(const TaskSpec& task, const Checkpoint& ck,
                       const Corpus& corpus, const SolveOptions& options,
                       const RetrievalGuidance* cached = nullptr);

// Dispatch plus optional best-of-N noise search by final constraint error.
SolveTrace solve(SolveMethod method, const TaskSpec& task, const Checkpoint& ck,
                 const Corpus* corpus, const SolveOptions& options,
                 const RetrievalGuidance* cached = nullptr);

// Structured-text report plus binary tensors for replay.
void save_trace(const SolveTrace& trace, const std::string& dir);

}  // namespace rgdno
