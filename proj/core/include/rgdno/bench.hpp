#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rgdno/pipeline.hpp"

namespace rgdno {

// Desk-scale benchmark tasks. Horizontal distances are 0.6x the full-scale
// setup so they match the corpus gaits (3 m in 60 frames); heights and
// counts are kept as-is.
std::vector<std::string> builtin_task_names();
TaskSpec builtin_task(const std::string& name);

struct BenchConfig {
  std::vector<std::string> tasks;  // empty = task1/task2/task3
  std::vector<SolveMethod> methods = {SolveMethod::kDno, SolveMethod::kRgdno,
                                      SolveMethod::kUnconstrained};
  int seeds = 16;
  std::uint64_t base_seed = 1000;
  bool run_sweeps = true;
  int sweep_seeds = 8;
  bool run_ablation = false;
  int ablation_seeds = 8;
  int workers = 0;
  std::string tasks_dir;  // load <name>.json from here when set
};

struct BenchRun {
  std::string task;
  std::string method;  // dno|rgdno|unconstrained or an ablation arm name
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double final_loss = 0.0;
  MetricsReport metrics;
};

struct BenchResults {
  std::vector<BenchRun> runs;
  std::vector<BenchRun> sweep_runs;
  std::vector<BenchRun> ablation_runs;
  int failures = 0;
};

// Runs the grid (parallel over runs, retrieval shared per task), the
// difficulty sweeps and optionally the ablation arms. Individual failures
// are recorded and the suite continues; a task with zero successful runs
// raises RuntimeFailure after all runs finish.
BenchResults run_bench(const Corpus& corpus, const Checkpoint& ck,
                       const BenchConfig& cfg, std::ostream* log = nullptr);

// Fixed, versioned column order; deterministic formatting.
void write_runs_csv(const std::string& path, const std::vector<BenchRun>& runs);
void write_aggregate_csv(const std::string& path,
                         const std::vector<BenchRun>& runs);
void write_all_outputs(const std::string& out_dir, const BenchResults& results);

// Quantile helpers shared with the acceptance suite.
double median_of(std::vector<double> values);
double quantile_of(std::vector<double> values, double q);

}  // namespace rgdno
