#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "rgdno/errors.hpp"
#include "rgdno/parsing.hpp"

namespace rgdno {

using nlohmann::json;

namespace {

const char* kDefaultInstruction =
    "You are given the constraints of a motion generation task, one per "
    "line as 'id: description'. Rank how hard each constraint is for a "
    "generic motion generator on a 0..1 scale (counting goals and tight "
    "spatial envelopes are hard, end-point targets are moderate, "
    "regularizers are easy). Then list pairwise relations that matter for "
    "retrieving a reference motion: mark 'connected' when two constraints "
    "should be satisfied by the same retrieved skill, and 'conflict' when "
    "satisfying one makes the other implausible in a single natural motion. "
    "Reply with JSON only: {\"difficulty\": {id: score, ...}, "
    "\"relations\": [[id, id, \"connected\"|\"conflict\"], ...]}.";

Annotations heuristic_annotations(const ConstraintSet& set) {
  Annotations ann;
  for (const auto& c : set.items) {
    ann.difficulty.emplace_back(c.id, default_difficulty(c.kind));
  }
  return ann;
}

}  // namespace

LlmEndpointConfig LlmEndpointConfig::from_environment() {
  LlmEndpointConfig cfg;
  if (const char* ep = std::getenv("RGDNO_LLM_ENDPOINT")) cfg.host = ep;
  if (const char* key = std::getenv("RGDNO_LLM_KEY")) cfg.api_key = key;
  return cfg;
}

LlmParseOutcome llm_annotate(const ConstraintSet& set,
                             const LlmEndpointConfig& cfg) {
  if (cfg.host.empty()) {
    throw ValidationError(
        "llm: no endpoint configured (set RGDNO_LLM_ENDPOINT)");
  }

  json body;
  body["instruction"] =
      cfg.instruction.empty() ? kDefaultInstruction : cfg.instruction;
  body["constraints"] = json::array();
  for (const auto& c : set.items) {
    body["constraints"].push_back(
        {{"id", c.id}, {"description", c.description()}});
  }

  httplib::Client client(cfg.host);
  client.set_connection_timeout(cfg.timeout_seconds);
  client.set_read_timeout(cfg.timeout_seconds);
  httplib::Headers headers;
  if (!cfg.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + cfg.api_key);
  }

  auto res = client.Post(cfg.path, headers, body.dump(), "application/json");
  if (!res) {
    throw RuntimeFailure("llm: endpoint " + cfg.host +
                         " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw RuntimeFailure("llm: endpoint returned HTTP " +
                         std::to_string(res->status));
  }

  LlmParseOutcome outcome;
  outcome.raw_response = res->body;
  json parsed = json::parse(res->body, nullptr, false);
  try {
    if (parsed.is_discarded()) throw ValidationError("not JSON");
    Annotations ann;
    for (const auto& [id, score] : parsed.at("difficulty").items()) {
      ann.difficulty.emplace_back(id, score.get<double>());
    }
    if (parsed.contains("relations")) {
      for (const auto& edge : parsed.at("relations")) {
        ann.relations.emplace_back(edge.at(0).get<std::string>(),
                                   edge.at(1).get<std::string>(),
                                   relation_from(edge.at(2).get<std::string>()));
      }
    }
    // Validate against the set before accepting.
    apply_annotations(set, ann);
    outcome.annotations = std::move(ann);
  } catch (const std::exception&) {
    if (!cfg.fallback_to_heuristic) {
      throw RuntimeFailure("llm: malformed response and fallback disabled");
    }
    outcome.annotations = heuristic_annotations(set);
    outcome.used_fallback = true;
  }
  return outcome;
}

}  // namespace rgdno
