#pragma once
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ambient/actuation.hpp"
#include "ambient/continuity.hpp"
#include "ambient/dialogue.hpp"
#include "ambient/fusion.hpp"
#include "ambient/ingest.hpp"
#include "ambient/initiative.hpp"
#include "ambient/memory.hpp"
#include "ambient/policy.hpp"
#include "ambient/scenario.hpp"
#include "ambient/stubs.hpp"

namespace ambient {

struct EngineConfig {
  FusionConfig fusion;
  PolicyTable policy;
  TriggerConfig triggers;
  InterventionThresholds intervention;
  OperationRegistry registry;
  IntentTable intents;
  RetentionTable retention;
  SourceRegistry sources;
  std::string persona =
      "Branch assistant for a retail bank: helpful, concise, privacy-first.";
  std::vector<std::string> constraints = {
      "Never render personally identifiable information on shared surfaces.",
      "Only whitelisted operations may execute, gated by risk tier."};
  int64_t token_ttl_ms = 120000;
  std::string proactive_consent_purpose = "proactive-assistance";
};

// Library defaults; config files and scenario overrides refine them.
EngineConfig default_engine_config();
json default_policy_table_json();
json default_operations_json();

// Reads fusion.json / policy.json / operations.json / triggers.json /
// intents.json / retention.json / sources.json from dir when present.
Result<EngineConfig> load_engine_config(const std::string& config_dir);
// Applies a scenario's config section (whole-section replacement).
Result<bool> apply_config_overrides(EngineConfig& config, const json& overrides);

// Per-session runtime state.
struct Session {
  std::string session_id;
  std::string user_id;
  std::string display_name;
  AuthLevel auth_level = AuthLevel::Anonymous;
  bool active = false;
  std::string personal_surface_id;
  std::vector<std::string> surfaces;  // attached surface ids; first is primary
  SessionTranscript transcript;
  FusionState fusion{""};
  DialogueTail tail;
  std::string latest_intent;
  std::string last_utterance;
  std::vector<std::string> allowed_item_refs;
  std::vector<std::string> open_questions;
  std::vector<ActionCall> calls;
  std::vector<ContentItem> held_items;  // awaiting a private surface
  std::optional<std::string> pending_consent_purpose;
  std::vector<std::string> device_signal_ids;  // contributors for active_surfaces
};

// Deterministic orchestration core: one instance per run, fed time-ordered
// events either from a scenario file or a live socket. All randomness (none
// in the default behaviors) must come from rng().
class Engine {
 public:
  Engine(EngineConfig config, uint64_t seed, json fixtures);

  // Initial surfaces/consents/sessions from a scenario preamble.
  void add_surface(const Surface& surface);
  void seed_consents(const std::vector<json>& consents);
  void seed_memory(const json& entries);
  void start_session(const json& spec, TimestampMs now_ms);

  // One event through the full pipeline; trigger evaluation and a state
  // snapshot follow every event.
  void process_event(const ScenarioEvent& event);

  RunReport finish();

  const MemoryStore& memory() const { return memory_; }
  MemoryStore& memory() { return memory_; }
  const AuditLog& audit() const { return audit_; }
  const EnterpriseStubs& stubs() const { return stubs_; }
  const BackendStubs& backends() const { return backends_; }
  Session* session() { return session_ ? session_.get() : nullptr; }
  std::mt19937_64& rng() { return rng_; }

 private:
  // event handlers
  void handle_sensor(const ScenarioEvent& ev);
  void handle_utterance(const ScenarioEvent& ev);
  void handle_auth(const ScenarioEvent& ev);
  void handle_consent(const ScenarioEvent& ev);
  void handle_confirmation(const ScenarioEvent& ev);
  void handle_step_up(const ScenarioEvent& ev);
  void handle_dual_control(const ScenarioEvent& ev);
  void handle_verification(const ScenarioEvent& ev);
  void handle_risk_score(const ScenarioEvent& ev);
  void handle_staff_status(const ScenarioEvent& ev);
  void handle_session_start(const ScenarioEvent& ev);
  void handle_session_end(const ScenarioEvent& ev);
  void handle_token_redeem(const ScenarioEvent& ev);
  void handle_memory_request(const ScenarioEvent& ev);

  // shared machinery
  void run_utterance(Session& s, const std::string& text, bool append_user_turn,
                     TimestampMs now);
  void apply_signal(const ContextSignal& signal);
  ContextSignal synthesize_signal(const std::string& channel, json payload, Layer layer,
                                  const std::string& source, double quality,
                                  TimestampMs now);
  std::vector<CandidateItem> collect_candidates(Session& s, const Intent& intent,
                                                TimestampMs now);
  void resolve_call_args(Session& s, ProposedCall& call);
  void propose_call(Session& s, const ProposedCall& proposed, TimestampMs now);
  ActionCall* find_call(CallStatus status);
  void attempt_execution(ActionCall& call, TimestampMs now);
  void deliver_item(Session& s, const ContentItem& item, TimestampMs now,
                    const std::string& purpose);
  void deliver_reply(Session& s, const std::string& text, TimestampMs now);
  void append_turn(Session& s, TurnRole role, const std::string& text, TimestampMs now);
  void system_note(Session& s, const std::string& text, TimestampMs now);
  void evaluate_initiative(TimestampMs now);
  void snapshot_state(TimestampMs now);
  void initiate_handoff(Session& s, const std::string& topic, TimestampMs now);
  void refresh_consent_scopes(Session& s, TimestampMs now);
  void refresh_active_surfaces(TimestampMs now);
  json audit_memory_request(Session& s, const std::string& op, TimestampMs now);
  InitiativeLevel initiative_cap(const Session& s, TimestampMs now) const;
  std::vector<Surface> attached_surfaces(const Session& s) const;
  const Surface* surface_by_id(const std::string& id) const;
  void register_default_backends();
  std::string next_id(const std::string& prefix);

  EngineConfig config_;
  uint64_t seed_;
  std::mt19937_64 rng_;
  std::string run_secret_;

  std::unique_ptr<Session> session_;
  std::map<std::string, SessionHandle> session_handles_;
  std::map<std::string, Surface> surfaces_;
  std::map<std::string, StaffMember> roster_;
  std::map<std::string, RiskAssessment> risk_by_op_;
  ConsentStore consents_;
  MemoryStore memory_;
  AuditLog audit_;
  EnterpriseStubs stubs_;
  BackendStubs backends_;
  TokenLedger tokens_;
  TriggerEngine triggers_;
  std::optional<std::string> last_token_wire_;

  std::map<std::string, uint64_t> id_counters_;
  uint64_t ingest_seq_ = 0;
  DedupWindow dedup_;
  std::set<std::string> seen_signal_ids_;

  RunReport report_;
  std::vector<json> finished_turns_;  // turns from ended sessions
};

// Loads, wires and runs one scenario end to end.
Result<RunReport> run_scenario(const Scenario& scenario, const EngineConfig& base_config,
                               std::optional<uint64_t> seed_override = std::nullopt);

}  // namespace ambient
