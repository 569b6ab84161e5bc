#pragma once
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ambient/initiative.hpp"
#include "ambient/policy.hpp"

namespace ambient {

struct Intent {
  std::string name = "unknown";
  std::map<std::string, std::string> slots;
  double confidence = 0.0;
};

struct IntentRule {
  std::string name;
  std::vector<std::string> patterns;              // case-insensitive substrings
  std::map<std::string, std::string> slot_regex;  // slot -> regex with one capture
  double confidence = 0.9;
};

struct IntentTable {
  std::vector<IntentRule> rules;  // declaration order is priority order
};

Result<IntentTable> intent_table_from_json(const json& j);
IntentTable default_intent_table();

// First matching rule wins; no match -> unknown with confidence 0 and no
// slots.
Intent detect_intent(const std::string& text, const IntentTable& table);

// One prompt item: display text plus the structured data templates read.
struct PromptItem {
  std::string item_id;
  std::string text;
  std::string source;  // situational | appointment_record | account_activity |
                       // prior_conversation | queue_system | persona | policy
  json data = json::object();
};

struct PromptSection {
  std::string name;
  std::vector<PromptItem> items;
};

// Context-augmented prompt. Sections appear in the fixed order persona,
// policy_constraints, situational_context, memory, dialogue_history,
// user_message; only allow-decided items enter a section.
struct PromptDocument {
  std::vector<PromptSection> sections;
  TimestampMs composed_at_ms = 0;
  std::map<std::string, PolicyDecision> authorization_trace;
  Intent detected_intent;

  const PromptSection* find_section(const std::string& name) const;
  json to_canonical() const;
};

struct CandidateItem {
  ContentItem item;
  std::string purpose;   // access purpose for the policy gate
  std::string section;   // situational_context | memory
  json data = json::object();
};

struct PromptInputs {
  std::string persona;
  std::vector<std::string> constraints;
  std::vector<CandidateItem> candidates;
  std::vector<std::pair<std::string, std::string>> history;  // (role, text)
  std::string user_message;
  Intent intent;
  std::string user_id;
  AuthLevel auth_level = AuthLevel::Anonymous;
};

// Runs every candidate through evaluate_access; exclusions are recorded in
// the authorization trace, never silently dropped.
PromptDocument compose_prompt(const PromptInputs& in, const PolicyTable& table,
                              const ConsentStore& consents, TimestampMs now_ms);

struct ProposedCall {
  std::string op_name;
  json args = json::object();
};

struct GeneratorOutput {
  std::string text;
  std::vector<ProposedCall> calls;
  std::string emotion = "neutral";  // neutral | warm | concerned
};

using Generator = std::function<Result<GeneratorOutput>(const PromptDocument&)>;

// Intent -> operation map used by the mock when proposing tool calls.
std::map<std::string, std::string> default_intent_ops();

// Template-driven mock: a pure function of the prompt document, so identical
// prompt bytes produce identical output bytes.
GeneratorOutput mock_generate(const PromptDocument& prompt);

// Invokes the generator; failures fall back to an apology plus a human
// handoff suggestion rather than silence.
GeneratorOutput generate_reply(const PromptDocument& prompt, const Generator& generator);

// One sentence per enterprise- or memory-sourced item actually present in
// the prompt, naming the source category.
std::vector<std::string> narrate_disclosure(const PromptDocument& prompt);

// Proactive utterance templates per trigger kind and decided level.
std::string proactive_utterance(TriggerKind kind, const json& params, InitiativeLevel level);

}  // namespace ambient
