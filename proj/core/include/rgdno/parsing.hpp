#pragma once

#include <string>
#include <vector>

#include "rgdno/constraints.hpp"

namespace rgdno {

enum class ParseStrategy { kManual, kHeuristic, kLlm };
const char* parse_strategy_name(ParseStrategy s);
ParseStrategy parse_strategy_from(const std::string& name);

// Default difficulty per kind when no annotation is given: counting >
// geometric barrier > target > regularizer.
double default_difficulty(ConstraintKind kind);

struct ParseResult {
  ConstraintSet retrieval_set;  // C_R
  ConstraintSet random_set;     // C_1, optimized from random noise
  ConstraintSet retrieved_set;  // C_2, optimized from retrieved noise
  std::string difficult_id;     // c_D
  ParseStrategy provenance = ParseStrategy::kHeuristic;
  int confidence = 1;           // s used
};

// Greedy relational parsing: start from C1 = C2 = C and an empty retrieval
// set, pick the most difficult constraint (ties -> declaration order), pull
// it and its connected neighbours into C_R, drop its conflict neighbours
// from C2, and drop it from C1 when the retrieval confidence s is 1.
ParseResult parse(const ConstraintSet& set, int confidence,
                  ParseStrategy strategy = ParseStrategy::kHeuristic);

// Difficulty and relation annotations, as produced by the LLM adapter.
struct Annotations {
  std::vector<std::pair<std::string, double>> difficulty;
  // (id, id, relation)
  std::vector<std::tuple<std::string, std::string, Relation>> relations;
};

// Returns a copy of the set with the annotations applied.
ConstraintSet apply_annotations(const ConstraintSet& set,
                                const Annotations& ann);

struct LlmEndpointConfig {
  std::string host;     // e.g. "http://127.0.0.1:8080"
  std::string path = "/parse";
  std::string api_key;  // optional bearer token
  int timeout_seconds = 30;
  bool fallback_to_heuristic = true;  // on malformed responses
  std::string instruction;            // filled with a default when empty

  // Reads RGDNO_LLM_ENDPOINT / RGDNO_LLM_KEY.
  static LlmEndpointConfig from_environment();
};

struct LlmParseOutcome {
  Annotations annotations;
  bool used_fallback = false;  // malformed response, heuristic defaults used
  std::string raw_response;
};

// POSTs {instruction, constraints:[{id, description}]} and expects
// {"difficulty": {id: score}, "relations": [[id, id, relation]]}. An
// unreachable endpoint is an error; a malformed response falls back to
// heuristic annotations when configured, else errors.
LlmParseOutcome llm_annotate(const ConstraintSet& set,
                             const LlmEndpointConfig& cfg);

}  // namespace rgdno
