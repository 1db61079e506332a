#include "rgdno/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "rgdno/archive.hpp"
#include "rgdno/errors.hpp"
#include "rgdno/optimizer.hpp"
#include "rgdno/rng.hpp"

namespace rgdno {

using nlohmann::json;

SolveMethod solve_method_from(const std::string& name) {
  if (name == "dno") return SolveMethod::kDno;
  if (name == "rgdno") return SolveMethod::kRgdno;
  if (name == "unconstrained") return SolveMethod::kUnconstrained;
  throw ValidationError("solve: unknown method '" + name + "'");
}

const char* solve_method_name(SolveMethod m) {
  switch (m) {
    case SolveMethod::kDno: return "dno";
    case SolveMethod::kRgdno: return "rgdno";
    case SolveMethod::kUnconstrained: return "unconstrained";
  }
  return "?";
}

Motion SolveTrace::final_motion() const {
  Motion m;
  m.frames = final_frames_m;
  m.frame_rate = kFrameRate;
  return m;
}

namespace {

class StageTimer {
 public:
  StageTimer(SolveTrace& trace, std::string name)
      : trace_(trace), name_(std::move(name)),
        start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const double s = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start_)
                         .count();
    trace_.stage_seconds[name_] += s;
    trace_.total_seconds += s;
  }

 private:
  SolveTrace& trace_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

Condition task_condition(const TaskSpec& task) {
  Condition c;
  c.tags = task.constraints.prompt_tags;
  c.guidance_scale = task.guidance_scale;
  return c;
}

Tensor draw_noise(Rng& rng, const Checkpoint& ck) {
  return Tensor::from({ck.length, ck.features},
                      rng.normal_vector(static_cast<std::size_t>(ck.flat_dim())));
}

Objective make_objective(const ConstraintSet& set, const Checkpoint& ck,
                         const Condition& cond) {
  return [&set, &ck, cond](const Tensor& z) {
    auto frames = ddim_sample_normalized(ck, z, cond);
    return constraint_loss_normalized(set, frames, ck.norm_mean, ck.norm_std);
  };
}

OptimizerConfig stage_config(int steps, double lr, double warmup) {
  OptimizerConfig cfg;
  cfg.steps = steps;
  cfg.learning_rate = lr;
  cfg.warmup_fraction = warmup;
  return cfg;
}

void finalize(SolveTrace& trace, const TaskSpec& task, const Checkpoint& ck,
              const Condition& cond, const Tensor& final_noise) {
  StageTimer timer(trace, "finalize");
  NoGradGuard guard;
  trace.final_noise = final_noise.detach();
  auto normalized = ddim_sample_normalized(ck, trace.final_noise, cond);
  trace.final_frames_m =
      denormalize_frames(normalized, ck.norm_mean, ck.norm_std);
  assert_all_finite(trace.final_frames_m, "final motion");
  trace.metrics =
      compute_metrics(trace.final_motion(), task.constraints, task.local_window);
  trace.final_loss = trace.metrics.constraint_error;
}

}  // namespace

RetrievalGuidance prepare_retrieval(const TaskSpec& task, const Checkpoint& ck,
                                    const Corpus& corpus,
                                    const ParseResult& parse,
                                    std::uint64_t selection_seed) {
  RetrievalGuidance g;
  if (corpus.size() == 0 || parse.retrieval_set.empty()) return g;

  g.report = retrieve(corpus, parse.retrieval_set, parse.difficult_id,
                      task.constraints.prompt_tags, task.constraints.length,
                      task.retrieval, selection_seed);
  if (!g.report.confident) return g;

  const auto& hit =
      g.report.hits[static_cast<std::size_t>(g.report.selected)];
  const auto& sample = corpus.samples[static_cast<std::size_t>(hit.corpus_index)];
  auto fitted =
      apply_transform(resize(sample.motion, task.constraints.length),
                      hit.transform);
  g.x_fitted_normalized =
      normalize_frames(fitted.frames, ck.norm_mean, ck.norm_std);

  auto inv = invert(ck, g.x_fitted_normalized, task_condition(task),
                    task.optimizer.invert_steps, task.optimizer.stage_lr);
  g.z_r = inv.noise;
  g.inversion_rmse = inv.rmse;
  g.inversion_low_confidence = inv.low_confidence;
  g.valid = true;
  return g;
}

SolveTrace solve_unconstrained(const TaskSpec& task, const Checkpoint& ck,
                               const SolveOptions& options) {
  task.validate();
  SolveTrace trace;
  trace.task_name = task.name;
  trace.task_json = task_to_json_text(task);
  trace.method = "unconstrained";
  trace.seed = options.seed;
  Rng rng(options.seed);
  trace.z0 = draw_noise(rng, ck);
  finalize(trace, task, ck, task_condition(task), trace.z0);
  return trace;
}

SolveTrace solve_dno(const TaskSpec& task, const Checkpoint& ck,
                     const SolveOptions& options) {
  task.validate();
  SolveTrace trace;
  trace.task_name = task.name;
  trace.task_json = task_to_json_text(task);
  trace.method = "dno";
  trace.seed = options.seed;
  Rng rng(options.seed);
  trace.z0 = draw_noise(rng, ck);

  const Condition cond = task_condition(task);
  Tensor result = trace.z0;
  {
    StageTimer timer(trace, "dno");
    auto opt = optimize_noise(
        trace.z0,
        make_objective(task.constraints, ck, cond),
        stage_config(task.optimizer.dno_steps, task.optimizer.dno_lr,
                     task.optimizer.warmup_fraction));
    trace.curves.push_back({"dno", std::move(opt.loss_curve)});
    result = opt.best;
  }
  finalize(trace, task, ck, cond, result);
  return trace;
}

SolveTrace solve_rgdno(const TaskSpec& task, const Checkpoint& ck,
                       const Corpus& corpus, const SolveOptions& options,
                       const RetrievalGuidance* cached) {
  task.validate();
  SolveTrace trace;
  trace.task_name = task.name;
  trace.task_json = task_to_json_text(task);
  trace.method = "rgdno";
  trace.seed = options.seed;
  Rng rng(options.seed);
  const Condition cond = task_condition(task);

  // Stage 1: relational task parsing.
  {
    StageTimer timer(trace, "parse");
    ConstraintSet annotated = task.constraints;
    ParseStrategy strategy = options.strategy;
    if (options.llm_annotations) {
      annotated = apply_annotations(annotated, *options.llm_annotations);
      strategy = ParseStrategy::kLlm;
    }
    trace.parse = parse(annotated, task.retrieval.confidence, strategy);
    trace.parsed = true;
  }

  // Stage 2: constraint-based retrieval plus noise inversion.
  RetrievalGuidance guidance;
  const RetrievalGuidance* g = cached;
  if (!g) {
    StageTimer timer(trace, "retrieve");
    guidance = prepare_retrieval(task, ck, corpus, trace.parse, options.seed);
    g = &guidance;
  }
  trace.retrieval = g->report;
  trace.retrieval_used = true;
  trace.retrieval_degenerate = !g->valid;
  trace.inversion_rmse = g->inversion_rmse;
  trace.inversion_low_confidence = g->inversion_low_confidence;

  if (trace.retrieval_degenerate && trace.parse.confidence == 1) {
    // Unconfident retrieval keeps the difficult constraint in the
    // random-noise set as well.
    StageTimer timer(trace, "parse");
    ConstraintSet annotated = task.constraints;
    if (options.llm_annotations) {
      annotated = apply_annotations(annotated, *options.llm_annotations);
    }
    trace.parse = parse(annotated, 0,
                        options.llm_annotations ? ParseStrategy::kLlm
                                                : options.strategy);
  }

  // Stage 3: fit z1 from fresh noise and z2 from the retrieved noise.
  trace.z0 = draw_noise(rng, ck);
  const auto stage_cfg =
      stage_config(task.optimizer.stage_steps, task.optimizer.stage_lr,
                   task.optimizer.warmup_fraction);
  {
    StageTimer timer(trace, "fit_z1");
    auto opt = optimize_noise(
        trace.z0, make_objective(trace.parse.random_set, ck, cond), stage_cfg);
    trace.curves.push_back({"fit_z1", std::move(opt.loss_curve)});
    trace.z1 = opt.best;
  }

  Tensor z_prime;
  if (!trace.retrieval_degenerate) {
    trace.z_r = g->z_r;
    {
      StageTimer timer(trace, "fit_z2");
      auto opt = optimize_noise(
          trace.z_r, make_objective(trace.parse.retrieved_set, ck, cond),
          stage_cfg);
      trace.curves.push_back({"fit_z2", std::move(opt.loss_curve)});
      trace.z2 = opt.best;
    }

    // Stage 4: reward-guided mask composition.
    StageTimer timer(trace, "mask");
    if (task.mask.force != MaskForce::kNone) {
      double value = 0.5;
      if (task.mask.force == MaskForce::kOnes) value = 1.0;
      if (task.mask.force == MaskForce::kZeros) value = 0.0;
      trace.mask.values = Tensor::full({ck.length, ck.features}, value);
      trace.mask.structure = "forced";
      trace.mask_used = true;
      z_prime = combine(trace.mask, trace.z1, trace.z2);
    } else {
      auto candidates =
          enumerate_candidates(ck.length, ck.features,
                               SpatialPartition::stick_agent(), task.mask);
      auto selection =
          select_mask(candidates, trace.z1, trace.z2, task.constraints,
                      task.rewards, ck, cond, options.inner_workers);
      trace.mask_index = selection.index;
      trace.mask_candidate_scores = std::move(selection.scores);

      auto blended = soft_blend(selection.mask, trace.z1, trace.z2,
                                task.constraints, task.rewards, ck, cond,
                                task.mask.soft_blend_steps,
                                task.mask.soft_blend_lr);
      trace.mask = blended.mask;
      trace.mask_score = blended.objective;
      trace.soft_blend_degraded = blended.degraded;
      trace.mask_used = true;
      z_prime = combine(trace.mask, trace.z1, trace.z2);
    }
  } else {
    // Degenerate retrieval: no z2 side, the random-noise fit carries on.
    z_prime = trace.z1;
  }
  trace.z_prime = z_prime.detach();

  // Stage 5: final round on the residual, keeping z' inspectable.
  Tensor final_noise;
  {
    StageTimer timer(trace, "final");
    const Tensor base = trace.z_prime;
    auto objective = [&](const Tensor& delta) {
      auto frames = ddim_sample_normalized(ck, base + delta, cond);
      return constraint_loss_normalized(task.constraints, frames,
                                        ck.norm_mean, ck.norm_std);
    };
    auto opt = optimize_noise(
        Tensor::zeros({ck.length, ck.features}), objective,
        stage_config(task.optimizer.final_steps, task.optimizer.final_lr,
                     task.optimizer.warmup_fraction));
    trace.curves.push_back({"final", std::move(opt.loss_curve)});
    trace.delta_z = opt.best;
    NoGradGuard guard;
    final_noise = base + trace.delta_z;
  }
  finalize(trace, task, ck, cond, final_noise);
  return trace;
}

SolveTrace solve(SolveMethod method, const TaskSpec& task, const Checkpoint& ck,
                 const Corpus* corpus, const SolveOptions& options,
                 const RetrievalGuidance* cached) {
  const int runs = std::max(1, options.noise_search_runs);
  SolveTrace best;
  bool have_best = false;
  Rng seeder(options.seed);
  for (int run = 0; run < runs; ++run) {
    SolveOptions run_options = options;
    run_options.seed = runs == 1 ? options.seed : seeder.fork(run).seed();
    SolveTrace trace;
    switch (method) {
      case SolveMethod::kDno:
        trace = solve_dno(task, ck, run_options);
        break;
      case SolveMethod::kUnconstrained:
        trace = solve_unconstrained(task, ck, run_options);
        break;
      case SolveMethod::kRgdno: {
        if (!corpus) {
          throw ValidationError("solve: rgdno needs a corpus");
        }
        trace = solve_rgdno(task, ck, *corpus, run_options, cached);
        break;
      }
    }
    if (!have_best || trace.final_loss < best.final_loss) {
      best = std::move(trace);
      have_best = true;
    }
  }
  return best;
}

void save_trace(const SolveTrace& trace, const std::string& dir) {
  std::filesystem::create_directories(dir);

  Archive tensors;
  auto put_if = [&](const char* name, const Tensor& t) {
    if (t.defined()) tensors.put_tensor(name, t);
  };
  put_if("z0", trace.z0);
  put_if("z_r", trace.z_r);
  put_if("z1", trace.z1);
  put_if("z2", trace.z2);
  put_if("mask", trace.mask.values);
  put_if("z_prime", trace.z_prime);
  put_if("delta_z", trace.delta_z);
  put_if("final_noise", trace.final_noise);
  put_if("final_motion", trace.final_frames_m);
  tensors.write(dir + "/tensors.rga");

  json j;
  j["format"] = "rgdno-trace-v1";
  j["task"] = trace.task_name;
  if (!trace.task_json.empty()) j["task_spec"] = json::parse(trace.task_json);
  j["method"] = trace.method;
  j["seed"] = trace.seed;
  if (trace.parsed) {
    json p;
    p["difficult"] = trace.parse.difficult_id;
    p["provenance"] = parse_strategy_name(trace.parse.provenance);
    p["confidence"] = trace.parse.confidence;
    auto ids = [](const ConstraintSet& s) {
      std::vector<std::string> out;
      for (const auto& c : s.items) out.push_back(c.id);
      return out;
    };
    p["retrieval_set"] = ids(trace.parse.retrieval_set);
    p["random_set"] = ids(trace.parse.random_set);
    p["retrieved_set"] = ids(trace.parse.retrieved_set);
    j["parse"] = p;
  }
  if (trace.retrieval_used) {
    json r;
    r["confident"] = trace.retrieval.confident;
    r["degenerate"] = trace.retrieval_degenerate;
    r["candidates_after_filter"] = trace.retrieval.candidates_after_filter;
    r["selected"] = trace.retrieval.selected;
    r["inversion_rmse"] = trace.inversion_rmse;
    r["inversion_low_confidence"] = trace.inversion_low_confidence;
    r["hits"] = json::array();
    for (const auto& hit : trace.retrieval.hits) {
      r["hits"].push_back({{"rank", hit.rank},
                           {"id", hit.id},
                           {"corpus_index", hit.corpus_index},
                           {"error", hit.error},
                           {"yaw", hit.transform.yaw},
                           {"tx", hit.transform.tx},
                           {"tz", hit.transform.tz}});
    }
    j["retrieval"] = r;
  }
  if (trace.mask_used) {
    json m;
    m["structure"] = trace.mask.structure;
    m["bits"] = trace.mask.bits;
    m["blocks"] = trace.mask.blocks;
    m["score"] = trace.mask_score;
    m["selected_index"] = trace.mask_index;
    m["soft_blend_degraded"] = trace.soft_blend_degraded;
    m["candidate_scores"] = trace.mask_candidate_scores;
    j["mask"] = m;
  }
  json curves = json::object();
  for (const auto& c : trace.curves) curves[c.name] = c.losses;
  j["curves"] = curves;
  j["final_loss"] = trace.final_loss;
  const auto& met = trace.metrics;
  j["metrics"] = {
      {"foot_skate_ratio", met.foot_skate_ratio},
      {"local_foot_skate", met.local_foot_skate},
      {"max_acceleration", met.max_acceleration},
      {"constraint_error", met.constraint_error},
      {"max_scene_penetration", met.max_scene_penetration},
      {"step_success", met.step_success},
      {"semantic_success", met.semantic_success},
      {"pace_score", met.pace_score},
      {"detected_steps", met.detected_steps},
      {"detected_claps", met.detected_claps},
  };
  json breakdown = json::object();
  for (const auto& [id, err] : met.constraint_breakdown) breakdown[id] = err;
  j["constraint_breakdown"] = breakdown;
  j["stage_seconds"] = trace.stage_seconds;
  j["total_seconds"] = trace.total_seconds;

  std::ofstream out(dir + "/report.json");
  if (!out) throw RuntimeFailure("trace: cannot write " + dir + "/report.json");
  out << j.dump(2) << "\n";
}

}  // namespace rgdno
