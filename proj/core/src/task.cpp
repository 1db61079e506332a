#include "rgdno/task.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rgdno/errors.hpp"

namespace rgdno {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& origin,
                              const std::string& context,
                              const std::string& what) {
  throw ValidationError("task " + origin + ": " + context + ": " + what);
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& origin,
            const std::string& context) {
  if (!j.contains(key)) field_error(origin, context, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    field_error(origin, context, std::string("bad field '") + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& origin,
         const std::string& context) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    field_error(origin, context, std::string("bad field '") + key + "': " + e.what());
  }
}

Constraint parse_constraint(const json& j, const std::string& origin) {
  Constraint c;
  c.id = get_field<std::string>(j, "id", origin, "constraints");
  const std::string context = "constraint '" + c.id + "'";
  c.kind = constraint_kind_from(
      get_field<std::string>(j, "kind", origin, context));
  c.weight = get_or<double>(j, "weight", 1.0, origin, context);
  if (j.contains("difficulty") && !j.at("difficulty").is_null()) {
    c.difficulty = get_field<double>(j, "difficulty", origin, context);
  }
  if (j.contains("relations")) {
    for (const auto& edge : j.at("relations")) {
      if (!edge.is_array() || edge.size() != 2) {
        field_error(origin, context, "relations entries must be [id, relation]");
      }
      c.relations.emplace_back(edge.at(0).get<std::string>(),
                               relation_from(edge.at(1).get<std::string>()));
    }
  }

  if (j.contains("params")) {
    const json& p = j.at("params");
    auto& cp = c.params;
    cp.half_width = get_or<double>(p, "half_width", cp.half_width, origin, context);
    cp.height = get_or<double>(p, "height", cp.height, origin, context);
    cp.z_from = get_or<double>(p, "z_from", cp.z_from, origin, context);
    cp.z_to = get_or<double>(p, "z_to", cp.z_to, origin, context);
    cp.joint = get_or<std::string>(p, "joint", cp.joint, origin, context);
    cp.frames = get_or<std::vector<int>>(p, "frames", {}, origin, context);
    if (p.contains("target")) {
      const json& t = p.at("target");
      if (t.contains("x")) cp.target_x = t.at("x").get<double>();
      if (t.contains("y")) cp.target_y = t.at("y").get<double>();
      if (t.contains("z")) cp.target_z = t.at("z").get<double>();
    }
    cp.end_frames = get_or<int>(p, "end_frames", cp.end_frames, origin, context);
    cp.zero_velocity =
        get_or<bool>(p, "zero_velocity", cp.zero_velocity, origin, context);
    cp.min_dist = get_or<double>(p, "min_dist", cp.min_dist, origin, context);
    cp.target_count =
        get_or<int>(p, "count", cp.target_count, origin, context);
    cp.theta_v = get_or<double>(p, "theta_v", cp.theta_v, origin, context);
    cp.theta_d = get_or<double>(p, "theta_d", cp.theta_d, origin, context);
    cp.t_scale = get_or<double>(p, "t_scale", cp.t_scale, origin, context);
    cp.min_spread =
        get_or<double>(p, "min_spread", cp.min_spread, origin, context);
    cp.temperature =
        get_or<double>(p, "temperature", cp.temperature, origin, context);
    cp.sharpness =
        get_or<double>(p, "sharpness", cp.sharpness, origin, context);
  }
  return c;
}

json constraint_to_json(const Constraint& c) {
  json j;
  j["id"] = c.id;
  j["kind"] = constraint_kind_name(c.kind);
  j["weight"] = c.weight;
  if (c.difficulty) j["difficulty"] = *c.difficulty;
  if (!c.relations.empty()) {
    json rels = json::array();
    for (const auto& [id, rel] : c.relations) {
      rels.push_back({id, relation_name(rel)});
    }
    j["relations"] = rels;
  }
  const auto& p = c.params;
  json params;
  switch (c.kind) {
    case ConstraintKind::kNarrowGap:
      params["half_width"] = p.half_width;
      params["z_from"] = p.z_from;
      params["z_to"] = p.z_to;
      break;
    case ConstraintKind::kOverheadBarrier:
      params["height"] = p.height;
      params["z_from"] = p.z_from;
      params["z_to"] = p.z_to;
      break;
    case ConstraintKind::kTargetPos:
    case ConstraintKind::kReachHigh: {
      params["joint"] = p.joint;
      if (!p.frames.empty()) params["frames"] = p.frames;
      json t;
      if (p.target_x) t["x"] = *p.target_x;
      if (p.target_y) t["y"] = *p.target_y;
      if (p.target_z) t["z"] = *p.target_z;
      params["target"] = t;
      if (c.kind == ConstraintKind::kReachHigh) {
        params["temperature"] = p.temperature;
      }
      break;
    }
    case ConstraintKind::kGroundContactEnds:
      params["end_frames"] = p.end_frames;
      params["zero_velocity"] = p.zero_velocity;
      break;
    case ConstraintKind::kPelvisHeightAt:
      params["height"] = p.height;
      if (!p.frames.empty()) params["frames"] = p.frames;
      break;
    case ConstraintKind::kSelfCollisionMinDist:
      params["min_dist"] = p.min_dist;
      break;
    case ConstraintKind::kStepCount:
      params["count"] = p.target_count;
      params["theta_v"] = p.theta_v;
      params["t_scale"] = p.t_scale;
      break;
    case ConstraintKind::kClapCount:
      params["count"] = p.target_count;
      params["theta_d"] = p.theta_d;
      params["t_scale"] = p.t_scale;
      break;
    case ConstraintKind::kClapWide:
      params["min_spread"] = p.min_spread;
      break;
  }
  j["params"] = params;
  return j;
}

}  // namespace

void TaskSpec::validate() const {
  if (constraints.length < 2) {
    throw ValidationError("task '" + name + "': length must be at least 2");
  }
  constraints.validate();
  if (retrieval.confidence != 0 && retrieval.confidence != 1) {
    throw ValidationError("task '" + name + "': retrieval confidence must be 0 or 1");
  }
  if (retrieval.top_k < 1) {
    throw ValidationError("task '" + name + "': retrieval top_k must be >= 1");
  }
  if (optimizer.stage_steps < 0 || optimizer.final_steps < 0 ||
      optimizer.dno_steps < 0 || optimizer.invert_steps < 0) {
    throw ValidationError("task '" + name + "': negative step budget");
  }
  if (rewards.lambda_jitter < 0 || rewards.lambda_footskate < 0 ||
      rewards.lambda_decorr < 0 || rewards.lambda_semantic < 0) {
    throw ValidationError("task '" + name + "': reward weights must be >= 0");
  }
}

TaskSpec task_from_json_text(const std::string& text,
                             const std::string& origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    // Re-parse with exceptions for a position-precise message.
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError("task " + origin + ": " + e.what());
    }
  }
  const std::string format = get_or<std::string>(j, "format", "", origin, "header");
  if (format != "rgdno-task-v1") {
    field_error(origin, "header", "format must be 'rgdno-task-v1'");
  }

  TaskSpec task;
  task.name = get_or<std::string>(j, "name", "unnamed", origin, "header");
  task.constraints.length = get_field<int>(j, "length", origin, "header");
  task.constraints.prompt_tags = get_or<std::vector<std::string>>(
      j, "prompt_tags", {}, origin, "header");

  if (!j.contains("constraints") || !j.at("constraints").is_array()) {
    field_error(origin, "header", "missing 'constraints' array");
  }
  for (const auto& cj : j.at("constraints")) {
    task.constraints.items.push_back(parse_constraint(cj, origin));
  }

  if (j.contains("retrieval")) {
    const json& r = j.at("retrieval");
    task.retrieval.confidence =
        get_or<int>(r, "confidence", 1, origin, "retrieval");
    task.retrieval.top_k = get_or<int>(r, "top_k", 5, origin, "retrieval");
    if (r.contains("error_threshold") && !r.at("error_threshold").is_null()) {
      task.retrieval.error_threshold =
          get_field<double>(r, "error_threshold", origin, "retrieval");
    }
    task.retrieval.secondary_weight_scale = get_or<double>(
        r, "weight_scale", 0.1, origin, "retrieval");
    task.retrieval.selection =
        get_or<std::string>(r, "selection", "rank0", origin, "retrieval");
    if (task.retrieval.selection != "rank0" &&
        task.retrieval.selection != "random") {
      field_error(origin, "retrieval", "selection must be rank0 or random");
    }
  }

  if (j.contains("rewards")) {
    const json& r = j.at("rewards");
    const std::string preset =
        get_or<std::string>(r, "preset", "", origin, "rewards");
    if (preset == "task1") task.rewards = RewardConfig::task1();
    else if (preset == "task2") task.rewards = RewardConfig::task2();
    else if (preset == "task3") task.rewards = RewardConfig::task3();
    else if (preset == "defaults" || preset.empty()) task.rewards = RewardConfig::defaults();
    else field_error(origin, "rewards", "unknown preset '" + preset + "'");
    task.rewards.lambda_jitter =
        get_or<double>(r, "jitter", task.rewards.lambda_jitter, origin, "rewards");
    task.rewards.lambda_footskate = get_or<double>(
        r, "footskate", task.rewards.lambda_footskate, origin, "rewards");
    task.rewards.lambda_decorr =
        get_or<double>(r, "decorr", task.rewards.lambda_decorr, origin, "rewards");
    task.rewards.lambda_semantic = get_or<double>(
        r, "semantic", task.rewards.lambda_semantic, origin, "rewards");
    task.rewards.semantic_hand_height = get_or<double>(
        r, "hand_height", task.rewards.semantic_hand_height, origin, "rewards");
  }

  if (j.contains("mask")) {
    const json& m = j.at("mask");
    task.mask.families = mask_family_from(
        get_or<std::string>(m, "families", "both", origin, "mask"));
    task.mask.temporal_blocks =
        get_or<int>(m, "temporal_blocks", 8, origin, "mask");
    task.mask.force = mask_force_from(
        get_or<std::string>(m, "force", "none", origin, "mask"));
    task.mask.soft_blend_steps =
        get_or<int>(m, "soft_blend_steps", 50, origin, "mask");
    task.mask.soft_blend_lr =
        get_or<double>(m, "soft_blend_lr", 0.05, origin, "mask");
  }

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    auto& b = task.optimizer;
    b.stage_steps = get_or<int>(o, "stage_steps", b.stage_steps, origin, "optimizer");
    b.stage_lr = get_or<double>(o, "stage_lr", b.stage_lr, origin, "optimizer");
    b.final_steps = get_or<int>(o, "final_steps", b.final_steps, origin, "optimizer");
    b.final_lr = get_or<double>(o, "final_lr", b.final_lr, origin, "optimizer");
    b.dno_steps = get_or<int>(o, "dno_steps", b.dno_steps, origin, "optimizer");
    b.dno_lr = get_or<double>(o, "dno_lr", b.dno_lr, origin, "optimizer");
    b.invert_steps = get_or<int>(o, "invert_steps", b.invert_steps, origin, "optimizer");
    b.warmup_fraction = get_or<double>(o, "warmup", b.warmup_fraction, origin, "optimizer");
  }

  task.guidance_scale = get_or<double>(j, "guidance_scale", 1.0, origin, "header");
  if (j.contains("metrics") && j.at("metrics").contains("local_window")) {
    auto w = j.at("metrics").at("local_window").get<std::vector<double>>();
    if (w.size() != 2) field_error(origin, "metrics", "local_window needs [lo, hi]");
    task.local_window = std::array<double, 2>{w[0], w[1]};
  }

  task.validate();
  return task;
}

TaskSpec load_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("task: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return task_from_json_text(buf.str(), path);
}

std::string task_to_json_text(const TaskSpec& task) {
  json j;
  j["format"] = "rgdno-task-v1";
  j["name"] = task.name;
  j["length"] = task.constraints.length;
  j["prompt_tags"] = task.constraints.prompt_tags;
  j["constraints"] = json::array();
  for (const auto& c : task.constraints.items) {
    j["constraints"].push_back(constraint_to_json(c));
  }
  j["retrieval"] = {
      {"confidence", task.retrieval.confidence},
      {"top_k", task.retrieval.top_k},
      {"weight_scale", task.retrieval.secondary_weight_scale},
      {"selection", task.retrieval.selection},
  };
  if (task.retrieval.error_threshold) {
    j["retrieval"]["error_threshold"] = *task.retrieval.error_threshold;
  }
  j["rewards"] = {
      {"jitter", task.rewards.lambda_jitter},
      {"footskate", task.rewards.lambda_footskate},
      {"decorr", task.rewards.lambda_decorr},
      {"semantic", task.rewards.lambda_semantic},
      {"hand_height", task.rewards.semantic_hand_height},
  };
  j["mask"] = {
      {"families", mask_family_name(task.mask.families)},
      {"temporal_blocks", task.mask.temporal_blocks},
      {"soft_blend_steps", task.mask.soft_blend_steps},
      {"soft_blend_lr", task.mask.soft_blend_lr},
  };
  j["optimizer"] = {
      {"stage_steps", task.optimizer.stage_steps},
      {"stage_lr", task.optimizer.stage_lr},
      {"final_steps", task.optimizer.final_steps},
      {"final_lr", task.optimizer.final_lr},
      {"dno_steps", task.optimizer.dno_steps},
      {"dno_lr", task.optimizer.dno_lr},
      {"invert_steps", task.optimizer.invert_steps},
      {"warmup", task.optimizer.warmup_fraction},
  };
  j["guidance_scale"] = task.guidance_scale;
  if (task.local_window) {
    j["metrics"]["local_window"] = {(*task.local_window)[0],
                                    (*task.local_window)[1]};
  }
  return j.dump(2) + "\n";
}

void save_task(const TaskSpec& task, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("task: cannot open " + path + " for writing");
  out << task_to_json_text(task);
}

}  // namespace rgdno
