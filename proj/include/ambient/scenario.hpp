#pragma once
#include <optional>
#include <string>
#include <vector>

#include "ambient/context.hpp"

namespace ambient {

struct ScenarioEvent {
  TimestampMs at_ms = 0;
  std::string kind;  // sensor | utterance | auth | consent | confirmation |
                     // step_up | dual_control | verification | risk_score |
                     // staff_status | tick | session_start | session_end |
                     // token_redeem | memory_request
  json fields = json::object();
  size_t line = 0;  // position in the scenario file, for error reporting
};

struct Assertion {
  std::string kind;  // state_equals | initiative_level | surface_routing |
                     // action_status | audit_property | transcript_contains |
                     // handoff_target
  json expect = json::object();
};

struct Scenario {
  std::string scenario_id;
  std::string description;
  uint64_t seed = 0;
  json session = json::object();    // initial session: session_id, surface ids
  json config = json::object();     // per-section engine config overrides
  json fixtures = json::object();   // enterprise stub tables
  std::vector<json> surfaces;       // surface definitions
  std::vector<json> registrations;  // ingestion source registrations
  std::vector<json> consents;       // enrollment opt-ins
  std::vector<ScenarioEvent> events;
  std::vector<Assertion> assertions;
};

// Parses and validates a scenario document: known event kinds, events sorted
// by at_ms, assertion payload shapes. Errors carry the offending position.
Result<Scenario> scenario_from_json(const json& j);
Result<Scenario> load_scenario(const std::string& path);

// Shapes an assertion expectation payload check, shared by load and lint.
std::vector<std::string> lint_scenario(const json& j);

struct AssertionResult {
  size_t index = 0;
  std::string kind;
  bool pass = false;
  std::string detail;  // expected-vs-actual diff on failure
};

// Everything a run produces; the canonical JSON form is byte-stable for a
// fixed (scenario, seed, config).
struct RunReport {
  std::string scenario_id;
  uint64_t seed = 0;
  std::vector<json> transcript;       // dialogue turns
  std::vector<json> state_timeline;   // {at_ms, digest, variables}
  std::vector<json> initiative_log;   // decisions incl. suppressed ones
  std::vector<json> policy_log;       // per-item decisions
  std::vector<json> intervention_log; // risk outcomes
  std::vector<json> deliveries;       // {at_ms, item_id, surface_id, body, pii}
  std::vector<json> handoffs;         // {at_ms, staff_id, summary}
  std::vector<json> token_events;     // {at_ms, action, token_id, outcome}
  std::vector<json> event_log;        // every scenario event, processed or rejected
  std::vector<json> calls;            // final action-call states
  std::vector<json> stub_calls;       // enterprise stub call log
  std::vector<json> rejections;       // ingest rejections
  std::string audit_jsonl;            // full audit chain content
  std::vector<AssertionResult> assertion_results;
  double wall_time_ms = 0;  // excluded from the canonical form

  bool all_assertions_pass() const;
  json to_canonical() const;
  std::string to_text() const;
};

// format: "json" (canonical bytes) or "text" (human-readable).
std::string emit_report(const RunReport& report, const std::string& format);

// Evaluates every declared assertion against the report, in order.
std::vector<AssertionResult> check_assertions(const RunReport& report,
                                              const Scenario& scenario);

}  // namespace ambient
