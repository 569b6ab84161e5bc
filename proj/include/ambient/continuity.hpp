#pragma once
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ambient/context.hpp"

namespace ambient {

// Signed, expiring, single-use capability that moves a session across
// surfaces or to staff. Integrity comes from a keyed digest over the
// canonical body with a per-run secret; tokens die with the run.
struct ContinuityToken {
  std::string token_id;
  std::string session_id;
  std::string issued_for;  // surface_id or staff_id
  TimestampMs issued_at_ms = 0;
  TimestampMs expires_at_ms = 0;
  std::vector<std::string> scope;  // purposes, sorted
  std::string signature;
};

json token_body_json(const ContinuityToken& t);  // canonical body, no signature

// Wire form: base64url(canonical body) + "." + hex signature.
std::string token_wire(const ContinuityToken& t);

struct StaffMember {
  std::string staff_id;
  std::set<std::string> specializations;
  enum class Availability { Free, Busy, Offline } availability = Availability::Offline;
  int workload = 0;
};

std::string to_string(StaffMember::Availability v);
Result<StaffMember::Availability> availability_from_string(const std::string& s);
Result<StaffMember> staff_from_json(const json& j);
json to_json(const StaffMember& s);

// Context package for a human takeover: references only, never raw PII
// bodies. Receiving terminals resolve the refs under their own scope.
struct HandoffSummary {
  std::string session_id;
  std::string stated_intent;
  std::vector<std::string> completed_steps;
  std::vector<std::string> retrieved_data_refs;
  std::vector<std::string> open_questions;
  std::string transcript_ref;
};

json to_json(const HandoffSummary& s);

class SessionRegistry;  // engine-owned; declared in engine.hpp

// Minimal view the continuity ops need from the session store.
struct SessionHandle {
  std::string session_id;
  bool active = false;
};

class TokenLedger {
 public:
  bool redeemed(const std::string& token_id) const { return redeemed_.count(token_id) > 0; }
  void mark_redeemed(const std::string& token_id) { redeemed_.insert(token_id); }

 private:
  std::set<std::string> redeemed_;
};

Result<ContinuityToken> mint_continuity_token(const SessionHandle& session,
                                              const std::string& issued_for,
                                              std::vector<std::string> scope, int64_t ttl_ms,
                                              const std::string& secret, TimestampMs now_ms);

struct Redemption {
  ContinuityToken token;
};

// Signature first, then expiry, session liveness, and the single-use check.
// Any single-byte mutation of the wire form fails the signature check.
Result<Redemption> redeem_continuity_token(const std::string& wire, const std::string& secret,
                                           TimestampMs now_ms,
                                           const std::map<std::string, SessionHandle>& sessions,
                                           TokenLedger& ledger);

// Free specialist with the topic, min workload (ties: staff_id); else free
// generalist ("general" or no specialization), min workload; else nobody.
std::optional<StaffMember> route_handoff(const std::string& topic,
                                         const std::vector<StaffMember>& roster);

struct HandoffInputs {
  std::string session_id;
  size_t turn_count = 0;
  std::string latest_intent;
  std::vector<std::string> executed_steps;     // from audit entries
  std::vector<std::string> allowed_item_refs;  // policy-allowed item ids only
  std::vector<std::string> open_questions;
};

Result<HandoffSummary> build_handoff_summary(const HandoffInputs& in);

}  // namespace ambient
