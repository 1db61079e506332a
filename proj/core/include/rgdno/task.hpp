#pragma once

#include <array>
#include <optional>
#include <string>

#include "rgdno/constraints.hpp"
#include "rgdno/mask.hpp"
#include "rgdno/retrieval.hpp"
#include "rgdno/rewards.hpp"

namespace rgdno {

// Per-stage optimization budgets; stage values cover z_R fitting, z1 and z2
// (N1 each), the final residual round is N2, and the plain baseline gets its
// own budget.
struct StageBudget {
  int stage_steps = 100;
  double stage_lr = 0.05;
  int final_steps = 400;
  double final_lr = 0.02;
  int dno_steps = 500;
  double dno_lr = 0.05;
  int invert_steps = 100;
  double warmup_fraction = 0.05;
};

// A complete task: the declarative constraint DSL plus retrieval, reward,
// mask and optimizer settings.
struct TaskSpec {
  std::string name;
  ConstraintSet constraints;  // carries prompt tags and target length
  RetrievalSettings retrieval;
  RewardConfig rewards;
  MaskSettings mask;
  StageBudget optimizer;
  double guidance_scale = 1.0;
  // Root-z window for the local foot-skate metric.
  std::optional<std::array<double, 2>> local_window;

  void validate() const;
};

// Versioned JSON task files ("rgdno-task-v1"). Malformed input raises
// ValidationError with the offending field or parse position.
TaskSpec load_task(const std::string& path);
TaskSpec task_from_json_text(const std::string& text,
                             const std::string& origin = "<inline>");
std::string task_to_json_text(const TaskSpec& task);
void save_task(const TaskSpec& task, const std::string& path);

}  // namespace rgdno
