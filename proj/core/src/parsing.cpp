#include "rgdno/parsing.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "rgdno/errors.hpp"

namespace rgdno {

const char* parse_strategy_name(ParseStrategy s) {
  switch (s) {
    case ParseStrategy::kManual: return "manual";
    case ParseStrategy::kHeuristic: return "heuristic";
    case ParseStrategy::kLlm: return "llm";
  }
  return "?";
}

ParseStrategy parse_strategy_from(const std::string& name) {
  if (name == "manual") return ParseStrategy::kManual;
  if (name == "heuristic") return ParseStrategy::kHeuristic;
  if (name == "llm") return ParseStrategy::kLlm;
  throw ValidationError("parsing: unknown strategy '" + name + "'");
}

double default_difficulty(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::kStepCount: return 0.9;
    case ConstraintKind::kClapCount: return 0.9;
    case ConstraintKind::kNarrowGap: return 0.75;
    case ConstraintKind::kOverheadBarrier: return 0.75;
    case ConstraintKind::kReachHigh: return 0.7;
    case ConstraintKind::kTargetPos: return 0.4;
    case ConstraintKind::kClapWide: return 0.3;
    case ConstraintKind::kSelfCollisionMinDist: return 0.25;
    case ConstraintKind::kPelvisHeightAt: return 0.2;
    case ConstraintKind::kGroundContactEnds: return 0.2;
  }
  return 0.1;
}

namespace {

// Relation between c_D and another constraint: edges are treated as
// undirected, declared edges only (absent means 'none').
Relation relation_between(const ConstraintSet& set, const std::string& a,
                          const std::string& b) {
  const Constraint* ca = set.find(a);
  const Constraint* cb = set.find(b);
  Relation out = Relation::kNone;
  auto scan = [&](const Constraint* c, const std::string& other) {
    if (!c) return;
    for (const auto& [id, rel] : c->relations) {
      if (id != other || rel == Relation::kNone) continue;
      if (out != Relation::kNone && out != rel) {
        throw ValidationError("parsing: contradictory relation between '" + a +
                              "' and '" + b + "'");
      }
      out = rel;
    }
  };
  scan(ca, b);
  scan(cb, a);
  return out;
}

}  // namespace

ParseResult parse(const ConstraintSet& set, int confidence,
                  ParseStrategy strategy) {
  set.validate();
  if (set.empty()) {
    throw ValidationError("parsing: empty constraint set");
  }
  if (confidence != 0 && confidence != 1) {
    throw ValidationError("parsing: retrieval confidence must be 0 or 1");
  }
  if (strategy == ParseStrategy::kManual) {
    bool any = false;
    for (const auto& c : set.items) any = any || c.difficulty.has_value();
    if (!any) {
      throw ValidationError(
          "parsing: manual strategy requires difficulty annotations");
    }
  }

  auto difficulty_of = [&](const Constraint& c) {
    if (c.difficulty) return *c.difficulty;
    if (strategy == ParseStrategy::kManual) return 0.0;  // unannotated floor
    return default_difficulty(c.kind);
  };

  // c_D = argmax difficulty, ties broken by declaration order.
  std::size_t best = 0;
  for (std::size_t i = 1; i < set.items.size(); ++i) {
    if (difficulty_of(set.items[i]) > difficulty_of(set.items[best])) {
      best = i;
    }
  }
  const std::string difficult_id = set.items[best].id;

  std::vector<Constraint> c_r, c_1, c_2;
  for (const auto& c : set.items) {
    const Relation rel = c.id == difficult_id
                             ? Relation::kNone
                             : relation_between(set, difficult_id, c.id);
    const bool is_difficult = c.id == difficult_id;
    if (is_difficult || rel == Relation::kConnected) c_r.push_back(c);
    if (!(is_difficult && confidence == 1)) c_1.push_back(c);
    if (!(rel == Relation::kConflict)) c_2.push_back(c);
  }

  ParseResult result;
  result.retrieval_set = set.with_items(std::move(c_r));
  result.random_set = set.with_items(std::move(c_1));
  result.retrieved_set = set.with_items(std::move(c_2));
  result.difficult_id = difficult_id;
  result.provenance = strategy;
  result.confidence = confidence;
  return result;
}

ConstraintSet apply_annotations(const ConstraintSet& set,
                                const Annotations& ann) {
  ConstraintSet out = set;
  for (const auto& [id, score] : ann.difficulty) {
    bool found = false;
    for (auto& c : out.items) {
      if (c.id == id) {
        c.difficulty = score;
        found = true;
      }
    }
    if (!found) {
      throw ValidationError("annotations: unknown constraint id '" + id + "'");
    }
  }
  for (const auto& [a, b, rel] : ann.relations) {
    bool found = false;
    for (auto& c : out.items) {
      if (c.id != a) continue;
      found = true;
      bool updated = false;
      for (auto& edge : c.relations) {
        if (edge.first == b) {
          edge.second = rel;
          updated = true;
        }
      }
      if (!updated) c.relations.emplace_back(b, rel);
    }
    if (!found || !out.contains(b)) {
      throw ValidationError("annotations: relation references unknown ids '" +
                            a + "', '" + b + "'");
    }
  }
  out.validate();
  return out;
}

}  // namespace rgdno
