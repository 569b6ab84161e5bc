#include "ambient/policy.hpp"

#include <algorithm>

namespace ambient {

std::string to_string(AuthLevel v) {
  switch (v) {
    case AuthLevel::Anonymous:
      return "anonymous";
    case AuthLevel::Authenticated:
      return "authenticated";
    case AuthLevel::StepUp:
      return "step_up";
  }
  return "?";
}

Result<AuthLevel> auth_level_from_string(const std::string& s) {
  if (s == "anonymous") return Result<AuthLevel>::success(AuthLevel::Anonymous);
  if (s == "authenticated") return Result<AuthLevel>::success(AuthLevel::Authenticated);
  if (s == "step_up") return Result<AuthLevel>::success(AuthLevel::StepUp);
  return Result<AuthLevel>::failure("unknown auth level: " + s);
}

std::string to_string(Outcome v) {
  switch (v) {
    case Outcome::Allow:
      return "allow";
    case Outcome::Deny:
      return "deny";
    case Outcome::Require:
      return "require";
  }
  return "?";
}

std::string to_string(RequiredStep v) {
  switch (v) {
    case RequiredStep::Consent:
      return "consent";
    case RequiredStep::StepUpAuth:
      return "step_up_auth";
    case RequiredStep::HumanDualControl:
      return "human_dual_control";
  }
  return "?";
}

json to_json(const PolicyDecision& d) {
  json j{{"outcome", to_string(d.outcome)}, {"reason", d.reason}};
  if (d.required_step) j["required_step"] = to_string(*d.required_step);
  return j;
}

json to_json(const ContentItem& item) {
  return json{{"item_id", item.item_id},
              {"body", item.body},
              {"pii", item.pii},
              {"sensitivity", to_string(item.sensitivity)},
              {"source", item.source}};
}

std::vector<std::string> lint_policy_table(const json& j) {
  std::vector<std::string> problems;
  if (!j.is_object() || !j.contains("entries") || !j.at("entries").is_array()) {
    problems.push_back("policy table must be an object with an 'entries' array");
    return problems;
  }
  std::set<std::string> seen;
  size_t idx = 0;
  for (const auto& e : j.at("entries")) {
    std::string where = "entry " + std::to_string(idx++);
    if (!e.is_object()) {
      problems.push_back(where + ": not an object");
      continue;
    }
    if (!e.contains("data_class") || !e.at("data_class").is_string()) {
      problems.push_back(where + ": missing data_class");
    } else {
      auto cls = sensitivity_from_string(e.at("data_class").get<std::string>());
      if (!cls.ok())
        problems.push_back(where + ": " + cls.error);
      else if (!seen.insert(e.at("data_class").get<std::string>()).second)
        problems.push_back(where + ": duplicate data_class");
    }
    if (!e.contains("min_auth") || !e.at("min_auth").is_string()) {
      problems.push_back(where + ": missing min_auth");
    } else {
      auto auth = auth_level_from_string(e.at("min_auth").get<std::string>());
      if (!auth.ok()) problems.push_back(where + ": " + auth.error);
    }
    if (e.contains("consent_required") && !e.at("consent_required").is_boolean())
      problems.push_back(where + ": consent_required must be a boolean");
    if (!e.contains("purposes") || !e.at("purposes").is_array() || e.at("purposes").empty())
      problems.push_back(where + ": purposes must be a non-empty array");
    else
      for (const auto& p : e.at("purposes"))
        if (!p.is_string() || p.get<std::string>().empty())
          problems.push_back(where + ": purposes entries must be non-empty strings");
  }
  return problems;
}

Result<PolicyTable> load_policy_table(const json& j) {
  auto problems = lint_policy_table(j);
  if (!problems.empty()) return Result<PolicyTable>::failure(problems.front());
  PolicyTable t;
  for (const auto& e : j.at("entries")) {
    PolicyRule rule;
    rule.data_class = *sensitivity_from_string(e.at("data_class").get<std::string>());
    rule.min_auth = *auth_level_from_string(e.at("min_auth").get<std::string>());
    rule.consent_required = e.value("consent_required", false);
    for (const auto& p : e.at("purposes")) rule.purposes.push_back(p.get<std::string>());
    t.rules[rule.data_class] = std::move(rule);
  }
  return Result<PolicyTable>::success(std::move(t));
}

PolicyDecision evaluate_access(const AccessRequest& request, const PolicyTable& table) {
  PolicyDecision d;
  if (request.purpose.empty() ||
      (request.consent && (request.consent->user_id != request.user_id ||
                           request.consent->purpose != request.purpose))) {
    d.outcome = Outcome::Deny;
    d.reason = "invalid request";
    return d;
  }

  auto rule_it = table.rules.find(request.data_class);
  if (rule_it == table.rules.end()) {
    d.outcome = Outcome::Deny;
    d.reason = "purpose limitation: no policy entry for data class";
    return d;
  }
  const PolicyRule& rule = rule_it->second;
  bool purpose_listed =
      std::any_of(rule.purposes.begin(), rule.purposes.end(),
                  [&](const std::string& p) { return p == "*" || p == request.purpose; });
  if (!purpose_listed) {
    d.outcome = Outcome::Deny;
    d.reason = "purpose limitation: '" + request.purpose + "' not permitted for " +
               to_string(request.data_class) + " data";
    return d;
  }

  bool auth_ok = static_cast<int>(request.auth_level) >= static_cast<int>(rule.min_auth);
  bool consent_ok = true;
  if (rule.consent_required) {
    consent_ok = request.consent && request.consent->expires_at_ms > request.now_ms;
  }

  if (auth_ok && consent_ok) {
    d.outcome = Outcome::Allow;
    d.reason = "granted";
    return d;
  }
  // Consent is the cheaper user step, so it is requested first when both are
  // missing; step-up surfaces on re-evaluation.
  if (!consent_ok) {
    d.outcome = Outcome::Require;
    d.required_step = RequiredStep::Consent;
    d.reason = request.consent ? "consent expired" : "consent required";
    return d;
  }
  d.outcome = Outcome::Require;
  d.required_step = RequiredStep::StepUpAuth;
  d.reason = "authentication level below " + to_string(rule.min_auth);
  return d;
}

namespace {

int capability_rank(const Surface& s) {
  int rank = 0;
  if (s.capabilities.count(Capability::Visual)) rank += 4;
  if (s.capabilities.count(Capability::Audio)) rank += 2;
  if (s.capabilities.count(Capability::Text)) rank += 1;
  return rank;
}

const Surface* pick_richest(const std::vector<const Surface*>& candidates) {
  const Surface* best = nullptr;
  for (const Surface* s : candidates) {
    if (!best || capability_rank(*s) > capability_rank(*best) ||
        (capability_rank(*s) == capability_rank(*best) && s->surface_id < best->surface_id))
      best = s;
  }
  return best;
}

}  // namespace

Result<Surface> select_surface(const ContentItem& item, const std::vector<Surface>& available) {
  if (available.empty()) return Result<Surface>::failure("no surfaces available");
  if (item.pii) {
    for (SurfacePrivacy wanted : {SurfacePrivacy::Personal, SurfacePrivacy::Authenticated}) {
      std::vector<const Surface*> candidates;
      for (const auto& s : available)
        if (s.privacy == wanted) candidates.push_back(&s);
      if (const Surface* best = pick_richest(candidates)) return Result<Surface>::success(*best);
    }
    return Result<Surface>::failure("no private surface");
  }
  std::vector<const Surface*> candidates;
  for (const auto& s : available) candidates.push_back(&s);
  return Result<Surface>::success(*pick_richest(candidates));
}

ContentItem redact_for_surface(const ContentItem& item, const Surface& surface) {
  if (surface.privacy != SurfacePrivacy::Shared || !item.pii) return item;
  ContentItem out = item;  // item_id retained for audit linkage
  out.body = kRedactedPlaceholder;
  out.pii = false;
  out.sensitivity = Sensitivity::Public;
  return out;
}

std::vector<std::string> ConsentStore::active_purposes(const std::string& user_id,
                                                       TimestampMs now_ms) const {
  std::set<std::string> purposes;
  for (const auto& r : records_)
    if (r.user_id == user_id && r.expires_at_ms > now_ms) purposes.insert(r.purpose);
  return {purposes.begin(), purposes.end()};
}

std::optional<ConsentRecord> evaluate_consent(const std::string& user_id,
                                              const std::string& purpose,
                                              const ConsentStore& store, TimestampMs now_ms) {
  const ConsentRecord* best = nullptr;
  for (const auto& r : store.records()) {
    if (r.user_id != user_id || r.purpose != purpose) continue;
    if (r.expires_at_ms <= now_ms) continue;
    if (!best || r.granted_at_ms > best->granted_at_ms ||
        (r.granted_at_ms == best->granted_at_ms && r.expires_at_ms > best->expires_at_ms))
      best = &r;
  }
  if (!best) return std::nullopt;
  return *best;
}

}  // namespace ambient
