#include "rgdno/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "rgdno/errors.hpp"
#include "rgdno/parallel.hpp"

namespace rgdno {

namespace {

Constraint make(const std::string& id, ConstraintKind kind) {
  Constraint c;
  c.id = id;
  c.kind = kind;
  return c;
}

Constraint start_anchor() {
  // Pins the first frame's root to the origin, like every corpus gait; the
  // transform search and the optimizer cannot relocate the walk wholesale.
  auto c = make("start", ConstraintKind::kTargetPos);
  c.params.joint = "root";
  c.params.frames = {0};
  c.params.target_x = 0.0;
  c.params.target_z = 0.0;
  return c;
}

TaskSpec task1_narrow_gap() {
  TaskSpec t;
  t.name = "task1_narrow_gap";
  t.constraints.length = 60;
  t.constraints.prompt_tags = {"walk_forward"};
  t.rewards = RewardConfig::task1();

  auto gap = make("gap", ConstraintKind::kNarrowGap);
  gap.params.half_width = 0.2;
  gap.params.z_from = 0.3;
  gap.params.z_to = 2.1;
  gap.relations = {{"target", Relation::kConnected},
                   {"start", Relation::kConnected}};

  auto target = make("target", ConstraintKind::kTargetPos);
  target.params.joint = "pelvis";
  target.params.target_z = 3.0;

  auto collision = make("self_collision", ConstraintKind::kSelfCollisionMinDist);
  collision.params.min_dist = 0.15;
  collision.weight = 0.5;

  auto ground = make("ground", ConstraintKind::kGroundContactEnds);
  ground.params.end_frames = 2;

  t.constraints.items = {gap, target, collision, ground, start_anchor()};
  return t;
}

TaskSpec task2_low_barrier(double height = 0.5) {
  TaskSpec t;
  t.name = "task2_low_barrier";
  t.constraints.length = 60;
  t.constraints.prompt_tags = {"walk_forward"};
  t.rewards = RewardConfig::task2();
  t.local_window = {{2.4, 3.0}};

  auto barrier = make("barrier", ConstraintKind::kOverheadBarrier);
  barrier.params.height = height;
  barrier.params.z_from = 1.2;
  barrier.params.z_to = 1.8;
  barrier.relations = {{"target", Relation::kConnected},
                       {"start", Relation::kConnected},
                       {"pelvis_end", Relation::kConflict}};

  auto target = make("target", ConstraintKind::kTargetPos);
  target.params.joint = "pelvis";
  target.params.target_z = 3.0;

  auto pelvis_start = make("pelvis_start", ConstraintKind::kPelvisHeightAt);
  pelvis_start.params.height = 0.9;
  pelvis_start.params.frames = {0};
  pelvis_start.weight = 0.5;

  auto pelvis_end = make("pelvis_end", ConstraintKind::kPelvisHeightAt);
  pelvis_end.params.height = 0.9;
  pelvis_end.params.frames = {59};
  pelvis_end.weight = 0.5;

  t.constraints.items = {barrier, target, pelvis_start, pelvis_end,
                         start_anchor()};
  return t;
}

TaskSpec task3_walk_steps(int steps = 6) {
  TaskSpec t;
  t.name = "task3_walk_steps";
  t.constraints.length = 60;
  t.constraints.prompt_tags = {"walk_forward", "raise_hand"};
  t.rewards = RewardConfig::task3();
  t.rewards.semantic_hand_height = 1.35;

  auto count = make("steps", ConstraintKind::kStepCount);
  count.params.target_count = steps;
  count.relations = {{"target", Relation::kConnected},
                     {"start", Relation::kConnected}};

  auto target = make("target", ConstraintKind::kTargetPos);
  target.params.joint = "pelvis";
  target.params.target_z = 2.4;

  auto ground = make("ground", ConstraintKind::kGroundContactEnds);
  ground.params.end_frames = 2;
  ground.params.zero_velocity = true;

  t.constraints.items = {count, target, ground, start_anchor()};
  return t;
}

TaskSpec clap_count_task() {
  TaskSpec t;
  t.name = "clap_count";
  t.constraints.length = 60;
  t.constraints.prompt_tags = {"walk_forward", "clap"};
  t.rewards = RewardConfig::defaults();
  t.rewards.lambda_semantic = 0.0;

  auto claps = make("claps", ConstraintKind::kClapCount);
  claps.params.target_count = 4;
  claps.relations = {{"target", Relation::kConnected},
                     {"start", Relation::kConnected}};

  auto wide = make("clap_wide", ConstraintKind::kClapWide);
  wide.params.min_spread = 0.4;
  wide.weight = 0.5;

  auto target = make("target", ConstraintKind::kTargetPos);
  target.params.joint = "pelvis";
  target.params.target_z = 1.8;

  t.constraints.items = {claps, wide, target, start_anchor()};
  return t;
}

TaskSpec combined_barrier_steps() {
  TaskSpec t;
  t.name = "combined_barrier_steps";
  t.constraints.length = 60;
  t.constraints.prompt_tags = {"walk_forward"};
  t.rewards = RewardConfig::defaults();
  t.rewards.lambda_semantic = 0.0;

  auto count = make("steps", ConstraintKind::kStepCount);
  count.params.target_count = 5;
  count.relations = {{"barrier", Relation::kConnected},
                     {"target", Relation::kConnected},
                     {"start", Relation::kConnected}};

  auto barrier = make("barrier", ConstraintKind::kOverheadBarrier);
  barrier.params.height = 1.0;
  barrier.params.z_from = 1.2;
  barrier.params.z_to = 1.8;

  auto target = make("target", ConstraintKind::kTargetPos);
  target.params.joint = "pelvis";
  target.params.target_z = 2.4;

  auto ground = make("ground", ConstraintKind::kGroundContactEnds);

  t.constraints.items = {count, barrier, target, ground, start_anchor()};
  return t;
}

TaskSpec reach_high_task() {
  TaskSpec t;
  t.name = "reach_high";
  t.constraints.length = 60;
  t.constraints.prompt_tags = {"walk_forward"};
  t.rewards = RewardConfig::defaults();
  t.rewards.lambda_semantic = 0.0;

  auto reach = make("reach", ConstraintKind::kReachHigh);
  reach.params.joint = "rfoot";
  reach.params.target_x = 0.0;
  reach.params.target_y = 1.1;
  reach.params.target_z = 1.5;
  reach.relations = {{"target", Relation::kConnected},
                     {"start", Relation::kConnected}};

  auto target = make("target", ConstraintKind::kTargetPos);
  target.params.joint = "pelvis";
  target.params.target_z = 3.0;

  auto ground = make("ground", ConstraintKind::kGroundContactEnds);

  t.constraints.items = {reach, target, ground, start_anchor()};
  return t;
}

}  // namespace

std::vector<std::string> builtin_task_names() {
  return {"task1_narrow_gap", "task2_low_barrier",      "task3_walk_steps",
          "clap_count",       "combined_barrier_steps", "reach_high"};
}

TaskSpec builtin_task(const std::string& name) {
  TaskSpec t;
  if (name == "task1_narrow_gap") t = task1_narrow_gap();
  else if (name == "task2_low_barrier") t = task2_low_barrier();
  else if (name == "task3_walk_steps") t = task3_walk_steps();
  else if (name == "clap_count") t = clap_count_task();
  else if (name == "combined_barrier_steps") t = combined_barrier_steps();
  else if (name == "reach_high") t = reach_high_task();
  else throw ValidationError("bench: unknown task '" + name + "'");
  t.validate();
  return t;
}

namespace {

TaskSpec load_bench_task(const BenchConfig& cfg, const std::string& name) {
  if (!cfg.tasks_dir.empty()) {
    const auto path = std::filesystem::path(cfg.tasks_dir) / (name + ".json");
    if (std::filesystem::exists(path)) return load_task(path.string());
  }
  return builtin_task(name);
}

BenchRun execute_run(const TaskSpec& task, const std::string& method_label,
                     SolveMethod method, std::uint64_t seed,
                     const Checkpoint& ck, const Corpus& corpus,
                     const RetrievalGuidance* guidance, int inner_workers) {
  BenchRun run;
  run.task = task.name;
  run.method = method_label;
  run.seed = seed;
  try {
    SolveOptions options;
    options.seed = seed;
    options.inner_workers = inner_workers;
    SolveTrace trace =
        solve(method, task, ck, &corpus, options, guidance);
    run.metrics = trace.metrics;
    run.final_loss = trace.final_loss;
    run.ok = true;
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

struct PlannedRun {
  TaskSpec task;
  std::string method_label;
  SolveMethod method;
  std::uint64_t seed = 0;
  const RetrievalGuidance* guidance = nullptr;
};

std::vector<BenchRun> execute_all(const std::vector<PlannedRun>& plan,
                                  const Checkpoint& ck, const Corpus& corpus,
                                  int workers, std::ostream* log) {
  std::vector<BenchRun> out(plan.size());
  const int inner = workers == 1 ? 0 : 1;
  parallel_for(
      plan.size(),
      [&](std::size_t i) {
        const auto& p = plan[i];
        out[i] = execute_run(p.task, p.method_label, p.method, p.seed, ck,
                             corpus, p.guidance, inner);
      },
      workers);
  if (log) {
    for (const auto& r : out) {
      *log << r.task << "," << r.method << ",seed=" << r.seed
           << (r.ok ? " ok, err=" + std::to_string(r.metrics.constraint_error)
                    : " FAILED: " + r.error)
           << "\n";
    }
  }
  return out;
}

// Retrieval guidance shared across seeds; only valid for deterministic
// rank-0 selection.
RetrievalGuidance make_guidance(const TaskSpec& task, const Checkpoint& ck,
                                const Corpus& corpus) {
  auto parsed = parse(task.constraints, task.retrieval.confidence,
                      ParseStrategy::kHeuristic);
  return prepare_retrieval(task, ck, corpus, parsed, 0);
}

}  // namespace

double quantile_of(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - lo;
  return values[lo] * (1.0 - w) + values[hi] * w;
}

double median_of(std::vector<double> values) {
  return quantile_of(std::move(values), 0.5);
}

namespace {
double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}
}  // namespace

BenchResults run_bench(const Corpus& corpus, const Checkpoint& ck,
                       const BenchConfig& cfg, std::ostream* log) {
  BenchResults results;
  std::vector<std::string> names = cfg.tasks;
  if (names.empty()) {
    names = {"task1_narrow_gap", "task2_low_barrier", "task3_walk_steps"};
  }

  // Main grid.
  std::vector<PlannedRun> plan;
  std::map<std::string, RetrievalGuidance> guidance;
  for (const auto& name : names) {
    TaskSpec task = load_bench_task(cfg, name);
    bool needs_retrieval = false;
    for (auto m : cfg.methods) needs_retrieval |= m == SolveMethod::kRgdno;
    if (needs_retrieval && task.retrieval.selection == "rank0") {
      if (log) *log << "preparing retrieval for " << task.name << "\n";
      guidance[task.name] = make_guidance(task, ck, corpus);
    }
    for (auto method : cfg.methods) {
      for (int s = 0; s < cfg.seeds; ++s) {
        PlannedRun p;
        p.task = task;
        p.method = method;
        p.method_label = solve_method_name(method);
        p.seed = cfg.base_seed + static_cast<std::uint64_t>(s);
        auto it = guidance.find(task.name);
        p.guidance = (method == SolveMethod::kRgdno && it != guidance.end() &&
                      it->second.valid)
                         ? &it->second
                         : nullptr;
        plan.push_back(std::move(p));
      }
    }
  }
  results.runs = execute_all(plan, ck, corpus, cfg.workers, log);

  // Difficulty sweeps.
  if (cfg.run_sweeps) {
    std::vector<PlannedRun> sweep_plan;
    std::map<std::string, RetrievalGuidance> sweep_guidance;
    auto add_sweep = [&](TaskSpec task) {
      if (log) *log << "preparing retrieval for " << task.name << "\n";
      sweep_guidance[task.name] = make_guidance(task, ck, corpus);
      for (auto method : {SolveMethod::kDno, SolveMethod::kRgdno}) {
        for (int s = 0; s < cfg.sweep_seeds; ++s) {
          PlannedRun p;
          p.task = task;
          p.method = method;
          p.method_label = solve_method_name(method);
          p.seed = cfg.base_seed + static_cast<std::uint64_t>(s);
          auto& g = sweep_guidance[task.name];
          p.guidance =
              (method == SolveMethod::kRgdno && g.valid) ? &g : nullptr;
          sweep_plan.push_back(std::move(p));
        }
      }
    };
    for (int steps : {5, 6, 7, 8}) {
      TaskSpec t = task3_walk_steps(steps);
      t.name = "sweep_steps_" + std::to_string(steps);
      add_sweep(std::move(t));
    }
    for (double h : {0.4, 0.5, 0.6, 0.8}) {
      TaskSpec t = task2_low_barrier(h);
      std::ostringstream name;
      name << "sweep_barrier_" << h;
      t.name = name.str();
      add_sweep(std::move(t));
    }
    results.sweep_runs = execute_all(sweep_plan, ck, corpus, cfg.workers, log);
  }

  // Ablation arms on task-2, same seeds across arms.
  if (cfg.run_ablation) {
    std::vector<PlannedRun> arm_plan;
    TaskSpec base = load_bench_task(cfg, "task2_low_barrier");
    auto base_guidance = make_guidance(base, ck, corpus);
    struct Arm {
      const char* label;
      MaskForce force;
    };
    const Arm arms[] = {{"rgdno_full", MaskForce::kNone},
                        {"retrieval_only", MaskForce::kZeros},
                        {"no_mask", MaskForce::kHalf},
                        {"random_only", MaskForce::kOnes}};
    for (const auto& arm : arms) {
      TaskSpec task = base;
      task.mask.force = arm.force;
      for (int s = 0; s < cfg.ablation_seeds; ++s) {
        PlannedRun p;
        p.task = task;
        p.method = SolveMethod::kRgdno;
        p.method_label = arm.label;
        p.seed = cfg.base_seed + static_cast<std::uint64_t>(s);
        p.guidance = base_guidance.valid ? &base_guidance : nullptr;
        arm_plan.push_back(std::move(p));
      }
    }
    results.ablation_runs = execute_all(arm_plan, ck, corpus, cfg.workers, log);
  }

  // Failure accounting: every task must have at least one successful run.
  std::map<std::string, std::pair<int, int>> per_task;  // ok, failed
  auto account = [&](const std::vector<BenchRun>& runs) {
    for (const auto& r : runs) {
      auto& [ok, failed] = per_task[r.task];
      (r.ok ? ok : failed)++;
      if (!r.ok) ++results.failures;
    }
  };
  account(results.runs);
  account(results.sweep_runs);
  account(results.ablation_runs);
  for (const auto& [task, counts] : per_task) {
    if (counts.first == 0) {
      throw RuntimeFailure("bench: task '" + task +
                           "' had zero successful runs");
    }
  }
  return results;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void write_runs_csv(const std::string& path, const std::vector<BenchRun>& runs) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("bench: cannot write " + path);
  out << "# rgdno-runs-v1\n";
  out << "task,method,seed,ok,final_loss,constraint_error,foot_skate,"
         "local_foot_skate,max_acceleration,max_scene_penetration,"
         "step_success,semantic_success,pace_score,detected_steps,"
         "detected_claps\n";
  for (const auto& r : runs) {
    const auto& m = r.metrics;
    out << r.task << ',' << r.method << ',' << r.seed << ','
        << (r.ok ? 1 : 0) << ',' << fmt(r.final_loss) << ','
        << fmt(m.constraint_error) << ',' << fmt(m.foot_skate_ratio) << ','
        << fmt(m.local_foot_skate) << ',' << fmt(m.max_acceleration) << ','
        << fmt(m.max_scene_penetration) << ',' << fmt(m.step_success) << ','
        << fmt(m.semantic_success) << ',' << fmt(m.pace_score) << ','
        << m.detected_steps << ',' << m.detected_claps << '\n';
  }
}

void write_aggregate_csv(const std::string& path,
                         const std::vector<BenchRun>& runs) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("bench: cannot write " + path);
  out << "# rgdno-aggregate-v1\n";
  out << "task,method,n,constraint_error_median,constraint_error_iqr,"
         "foot_skate_median,local_foot_skate_median,max_acceleration_median,"
         "max_scene_penetration_median,step_success_rate,"
         "semantic_success_rate,pace_score_median\n";

  std::map<std::pair<std::string, std::string>, std::vector<const BenchRun*>>
      groups;
  for (const auto& r : runs) {
    if (r.ok) groups[{r.task, r.method}].push_back(&r);
  }
  for (const auto& [key, group] : groups) {
    auto collect = [&](auto getter) {
      std::vector<double> v;
      for (const auto* r : group) v.push_back(getter(*r));
      return v;
    };
    auto errs = collect([](const BenchRun& r) { return r.metrics.constraint_error; });
    out << key.first << ',' << key.second << ',' << group.size() << ','
        << fmt(median_of(errs)) << ','
        << fmt(quantile_of(errs, 0.75) - quantile_of(errs, 0.25)) << ','
        << fmt(median_of(collect([](const BenchRun& r) { return r.metrics.foot_skate_ratio; }))) << ','
        << fmt(median_of(collect([](const BenchRun& r) { return r.metrics.local_foot_skate; }))) << ','
        << fmt(median_of(collect([](const BenchRun& r) { return r.metrics.max_acceleration; }))) << ','
        << fmt(median_of(collect([](const BenchRun& r) { return r.metrics.max_scene_penetration; }))) << ','
        << fmt(mean_of(collect([](const BenchRun& r) { return r.metrics.step_success; }))) << ','
        << fmt(mean_of(collect([](const BenchRun& r) { return r.metrics.semantic_success; }))) << ','
        << fmt(median_of(collect([](const BenchRun& r) { return r.metrics.pace_score; })))
        << '\n';
  }
}

void write_all_outputs(const std::string& out_dir, const BenchResults& results) {
  std::filesystem::create_directories(out_dir);
  write_runs_csv(out_dir + "/runs.csv", results.runs);
  write_aggregate_csv(out_dir + "/aggregate.csv", results.runs);
  if (!results.sweep_runs.empty()) {
    write_runs_csv(out_dir + "/sweep_runs.csv", results.sweep_runs);
    write_aggregate_csv(out_dir + "/sweep_summary.csv", results.sweep_runs);
  }
  if (!results.ablation_runs.empty()) {
    write_runs_csv(out_dir + "/ablation_runs.csv", results.ablation_runs);
    write_aggregate_csv(out_dir + "/ablation_summary.csv",
                        results.ablation_runs);
  }
}

}  // namespace rgdno
