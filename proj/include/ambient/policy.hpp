#pragma once
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ambient/context.hpp"

namespace ambient {

enum class AuthLevel { Anonymous = 0, Authenticated = 1, StepUp = 2 };

std::string to_string(AuthLevel v);
Result<AuthLevel> auth_level_from_string(const std::string& s);

struct AccessRequest {
  std::string user_id;
  Sensitivity data_class = Sensitivity::Public;
  std::string purpose;
  AuthLevel auth_level = AuthLevel::Anonymous;
  std::optional<ConsentRecord> consent;
  TimestampMs now_ms = 0;
};

enum class Outcome { Allow, Deny, Require };
enum class RequiredStep { Consent, StepUpAuth, HumanDualControl };

std::string to_string(Outcome v);
std::string to_string(RequiredStep v);

struct PolicyDecision {
  Outcome outcome = Outcome::Deny;
  std::string reason;
  std::optional<RequiredStep> required_step;

  bool allowed() const { return outcome == Outcome::Allow; }
};

json to_json(const PolicyDecision& d);

// A unit of content heading to a user-facing surface. pii is set by the
// producer; pii implies sensitivity >= confidential.
struct ContentItem {
  std::string item_id;
  std::string body;
  bool pii = false;
  Sensitivity sensitivity = Sensitivity::Internal;
  std::string source;  // provenance/category reference, e.g. "appointment_record"
};

json to_json(const ContentItem& item);

struct PolicyRule {
  Sensitivity data_class = Sensitivity::Public;
  AuthLevel min_auth = AuthLevel::Anonymous;
  bool consent_required = false;
  std::vector<std::string> purposes;  // "*" admits any purpose
};

struct PolicyTable {
  std::map<Sensitivity, PolicyRule> rules;
};

// Declarative table load; lint returns every problem instead of stopping at
// the first so `policy lint` output is useful.
Result<PolicyTable> load_policy_table(const json& j);
std::vector<std::string> lint_policy_table(const json& j);

// allow iff auth >= minimum and (consent required => valid unexpired consent
// for the purpose). Missing purpose in the table denies ("purpose
// limitation"); consent is requested before step-up when both are missing.
PolicyDecision evaluate_access(const AccessRequest& request, const PolicyTable& table);

// pii content goes to personal surfaces first, then authenticated ones; never
// shared. Non-pii prefers the richest capability set (visual > audio > text),
// ties broken by surface_id.
Result<Surface> select_surface(const ContentItem& item, const std::vector<Surface>& available);

// On a shared surface a pii body collapses to a generic placeholder (id kept
// for audit linkage); everywhere else the item passes through unchanged.
ContentItem redact_for_surface(const ContentItem& item, const Surface& surface);

inline constexpr const char* kRedactedPlaceholder = "details sent to your device";

class ConsentStore {
 public:
  void grant(ConsentRecord record) { records_.push_back(std::move(record)); }
  const std::vector<ConsentRecord>& records() const { return records_; }
  // Purposes with an active record for the user, sorted.
  std::vector<std::string> active_purposes(const std::string& user_id, TimestampMs now_ms) const;

 private:
  std::vector<ConsentRecord> records_;
};

// Most recent unexpired record for (user, purpose); expiry is exclusive
// (expires_at == now counts as expired).
std::optional<ConsentRecord> evaluate_consent(const std::string& user_id,
                                              const std::string& purpose,
                                              const ConsentStore& store, TimestampMs now_ms);

}  // namespace ambient
