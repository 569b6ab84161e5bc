#pragma once
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ambient/context.hpp"

namespace ambient {

enum class Tier { Low, Medium, High };

std::string to_string(Tier v);
Result<Tier> tier_from_string(const std::string& s);

struct ParamSpec {
  std::string name;
  std::string type;  // string | int | number | bool
  bool required = true;
  std::optional<double> min;
  std::optional<double> max;
  std::vector<std::string> one_of;  // for string params
};

struct OperationSchema {
  std::string op_name;
  std::vector<ParamSpec> params;
  Tier tier = Tier::Low;
  bool dual_control = false;
  std::string description;
};

Result<OperationSchema> operation_schema_from_json(const json& j);

class OperationRegistry {
 public:
  // Rejects duplicates and schemas that fail self-validation
  // (dual_control requires the high tier, param specs must be well formed).
  Result<bool> register_operation(OperationSchema schema);

  bool has(const std::string& op_name) const { return ops_.count(op_name) > 0; }
  const OperationSchema* find(const std::string& op_name) const;
  Result<Tier> classify_tier(const std::string& op_name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, OperationSchema> ops_;
};

// Loads the whitelist from a config document; throws on invalid schemas.
OperationRegistry load_registry(const json& list);

enum class CallStatus {
  Ready,  // validated, prerequisites satisfied, not yet executed
  PendingConfirmation,
  PendingStepUp,
  PendingDualControl,
  Executed,
  Rejected,
  Suspended
};

std::string to_string(CallStatus v);

struct Confirmation {
  TimestampMs confirmed_at_ms = 0;
  std::string channel;
};
struct StepUpVerification {
  TimestampMs verified_at_ms = 0;
  std::string method;
};
struct DualApproval {
  TimestampMs approved_at_ms = 0;
  std::string staff_id;
};
struct IntentVerification {
  TimestampMs at_ms = 0;
  std::string channel;
};

struct RiskAssessment {
  std::string call_id;
  double score = 0.0;
  std::vector<std::string> indicators;
  std::string source = "risk-stub";
};

struct ActionCall {
  std::string call_id;
  std::string op_name;
  json args = json::object();
  std::string session_id;
  TimestampMs requested_at_ms = 0;
  std::optional<Confirmation> confirmation;
  std::optional<StepUpVerification> step_up;
  std::optional<DualApproval> dual_approval;
  std::optional<IntentVerification> verified;  // clears a risk intervention
  CallStatus status = CallStatus::PendingConfirmation;
  std::string reason;
};

json to_json(const ActionCall& c);

// Whitelist + schema validation. Valid calls come back in the tier's initial
// status (low: ready, medium/high: pending_confirmation); anything else is a
// rejection that never reaches a backend.
Result<ActionCall> validate_call(const std::string& op_name, const json& args,
                                 const OperationRegistry& registry,
                                 const std::string& session_id, TimestampMs now_ms,
                                 const std::string& call_id);

enum class InterventionOutcome { Proceed, Clarify, RecommendStaff, Suspend };

std::string to_string(InterventionOutcome v);

struct InterventionThresholds {
  double clarify = 0.25;
  double staff = 0.6;
  double suspend = 0.85;
};

Result<InterventionThresholds> validate_intervention_thresholds(const InterventionThresholds& t);

// Graduated mapping of the risk score: below clarify -> proceed, then
// clarify, recommend_staff, suspend.
InterventionOutcome evaluate_intervention(const RiskAssessment& risk,
                                          const InterventionThresholds& thresholds);

inline constexpr const char* kClarifyPrompt =
    "This transaction is larger than your typical activity — can you confirm this is "
    "intentional?";

// ---- audit ----

inline constexpr const char* kAuditGenesis =
    "0000000000000000000000000000000000000000000000000000000000000000";

// Append-only hash chain: entry_digest = sha256(prev_digest + canonical body).
class AuditLog {
 public:
  // body carries call_id/op_name/status/context_digest/consent_state plus any
  // extra fields (risk score, intervention outcome, reason). seq, timestamps
  // and chain digests are filled here.
  const json& append(json body, TimestampMs timestamp_ms);

  const std::vector<json>& entries() const { return entries_; }
  const std::string& last_digest() const { return last_digest_; }
  std::string to_jsonl() const;
  void save(const std::string& path) const;

  struct VerifyResult {
    bool ok = true;
    int64_t failed_seq = 0;
    std::string reason;
  };
  static VerifyResult verify(const std::vector<json>& entries);
  static VerifyResult verify_jsonl(const std::string& text);
  static VerifyResult verify_file(const std::string& path);

 private:
  std::vector<json> entries_;
  std::string last_digest_ = kAuditGenesis;
};

// Backends are process-local stubs; the call log exists so tests can assert
// whitelist totality.
class BackendStubs {
 public:
  using Backend = std::function<Result<json>(const json& args)>;

  void register_backend(const std::string& op_name, Backend fn) {
    backends_[op_name] = std::move(fn);
  }
  bool has(const std::string& op_name) const { return backends_.count(op_name) > 0; }
  Result<json> invoke(const std::string& op_name, const json& args);
  const std::vector<std::string>& call_log() const { return call_log_; }

 private:
  std::map<std::string, Backend> backends_;
  std::vector<std::string> call_log_;
};

struct ExecutionContext {
  const SituationalState* state = nullptr;  // hashed into the audit entry
  std::vector<std::string> consent_purposes;
  InterventionThresholds intervention;
  TimestampMs now_ms = 0;
};

struct ExecutionOutcome {
  ActionCall call;
  json result;                                        // backend result when executed
  std::optional<InterventionOutcome> intervention;    // set when a risk check ran
  std::string note;                                   // clarify prompt / staff advice
};

// Tier-gated execution. Prerequisite checks park the call in the matching
// pending status; once prerequisites hold, the risk intervention runs and may
// divert to suspended before any backend effect. Every attempt appends
// exactly one audit entry.
ExecutionOutcome execute_call(ActionCall call, const std::optional<RiskAssessment>& risk,
                              const OperationRegistry& registry, BackendStubs& backends,
                              AuditLog& audit, const ExecutionContext& ctx);

}  // namespace ambient
