#include "ambient/continuity.hpp"

#include <algorithm>

#include "ambient/digest.hpp"

namespace ambient {

json token_body_json(const ContinuityToken& t) {
  return json{{"token_id", t.token_id},       {"session_id", t.session_id},
              {"issued_for", t.issued_for},   {"issued_at_ms", t.issued_at_ms},
              {"expires_at_ms", t.expires_at_ms}, {"scope", t.scope}};
}

std::string token_wire(const ContinuityToken& t) {
  return base64url_encode(canonical_dump(token_body_json(t))) + "." + t.signature;
}

std::string to_string(StaffMember::Availability v) {
  switch (v) {
    case StaffMember::Availability::Free:
      return "free";
    case StaffMember::Availability::Busy:
      return "busy";
    case StaffMember::Availability::Offline:
      return "offline";
  }
  return "?";
}

Result<StaffMember::Availability> availability_from_string(const std::string& s) {
  using A = StaffMember::Availability;
  if (s == "free") return Result<A>::success(A::Free);
  if (s == "busy") return Result<A>::success(A::Busy);
  if (s == "offline") return Result<A>::success(A::Offline);
  return Result<A>::failure("unknown availability: " + s);
}

Result<StaffMember> staff_from_json(const json& j) {
  using R = Result<StaffMember>;
  if (!j.is_object()) return R::failure("staff: not an object");
  StaffMember s;
  try {
    s.staff_id = j.at("staff_id").get<std::string>();
    for (const auto& spec : j.value("specializations", json::array()))
      s.specializations.insert(spec.get<std::string>());
    auto avail = availability_from_string(j.value("availability", "offline"));
    if (!avail.ok()) return R::failure(avail.error);
    s.availability = *avail;
    s.workload = j.value("workload", 0);
  } catch (const json::exception& e) {
    return R::failure(std::string("staff: ") + e.what());
  }
  if (s.workload < 0) return R::failure("staff: workload must be >= 0");
  return R::success(std::move(s));
}

json to_json(const StaffMember& s) {
  json specs = json::array();
  for (const auto& sp : s.specializations) specs.push_back(sp);
  return json{{"staff_id", s.staff_id},
              {"specializations", specs},
              {"availability", to_string(s.availability)},
              {"workload", s.workload}};
}

json to_json(const HandoffSummary& s) {
  return json{{"session_id", s.session_id},
              {"stated_intent", s.stated_intent},
              {"completed_steps", s.completed_steps},
              {"retrieved_data_refs", s.retrieved_data_refs},
              {"open_questions", s.open_questions},
              {"transcript_ref", s.transcript_ref}};
}

Result<ContinuityToken> mint_continuity_token(const SessionHandle& session,
                                              const std::string& issued_for,
                                              std::vector<std::string> scope, int64_t ttl_ms,
                                              const std::string& secret, TimestampMs now_ms) {
  using R = Result<ContinuityToken>;
  if (!session.active) return R::failure("session not active");
  if (ttl_ms <= 0) return R::failure("ttl must be > 0");

  ContinuityToken t;
  t.session_id = session.session_id;
  t.issued_for = issued_for;
  t.issued_at_ms = now_ms;
  t.expires_at_ms = now_ms + ttl_ms;
  std::sort(scope.begin(), scope.end());
  t.scope = std::move(scope);
  // Deterministic id so identical inputs mint identical token bytes.
  t.token_id =
      "ct-" + hmac_sha256_hex(secret, t.session_id + "|" + t.issued_for + "|" +
                                          std::to_string(t.issued_at_ms) + "|" +
                                          std::to_string(t.expires_at_ms))
                  .substr(0, 12);
  t.signature = hmac_sha256_hex(secret, canonical_dump(token_body_json(t)));
  return R::success(std::move(t));
}

Result<Redemption> redeem_continuity_token(const std::string& wire, const std::string& secret,
                                           TimestampMs now_ms,
                                           const std::map<std::string, SessionHandle>& sessions,
                                           TokenLedger& ledger) {
  using R = Result<Redemption>;
  auto dot = wire.find('.');
  if (dot == std::string::npos) return R::failure("invalid signature");
  auto body_bytes = base64url_decode(wire.substr(0, dot));
  if (!body_bytes) return R::failure("invalid signature");
  std::string given_sig = wire.substr(dot + 1);
  if (hmac_sha256_hex(secret, *body_bytes) != given_sig) return R::failure("invalid signature");

  json body = json::parse(*body_bytes, nullptr, false);
  if (body.is_discarded() || !body.is_object()) return R::failure("invalid signature");

  ContinuityToken t;
  try {
    t.token_id = body.at("token_id").get<std::string>();
    t.session_id = body.at("session_id").get<std::string>();
    t.issued_for = body.at("issued_for").get<std::string>();
    t.issued_at_ms = body.at("issued_at_ms").get<int64_t>();
    t.expires_at_ms = body.at("expires_at_ms").get<int64_t>();
    t.scope = body.at("scope").get<std::vector<std::string>>();
  } catch (const json::exception&) {
    return R::failure("invalid signature");
  }
  t.signature = std::move(given_sig);

  if (t.expires_at_ms <= now_ms) return R::failure("expired");
  auto session = sessions.find(t.session_id);
  if (session == sessions.end() || !session->second.active)
    return R::failure("unknown or inactive session");
  if (ledger.redeemed(t.token_id)) return R::failure("already redeemed");
  ledger.mark_redeemed(t.token_id);
  return R::success(Redemption{std::move(t)});
}

std::optional<StaffMember> route_handoff(const std::string& topic,
                                         const std::vector<StaffMember>& roster) {
  auto better = [](const StaffMember& a, const StaffMember& b) {
    return a.workload < b.workload ||
           (a.workload == b.workload && a.staff_id < b.staff_id);
  };
  const StaffMember* specialist = nullptr;
  const StaffMember* generalist = nullptr;
  for (const auto& s : roster) {
    if (s.availability != StaffMember::Availability::Free) continue;
    if (s.specializations.count(topic)) {
      if (!specialist || better(s, *specialist)) specialist = &s;
    } else if (s.specializations.empty() || s.specializations.count("general")) {
      if (!generalist || better(s, *generalist)) generalist = &s;
    }
  }
  if (specialist) return *specialist;
  if (generalist) return *generalist;
  return std::nullopt;
}

Result<HandoffSummary> build_handoff_summary(const HandoffInputs& in) {
  using R = Result<HandoffSummary>;
  if (in.turn_count == 0) return R::failure("empty session");
  HandoffSummary s;
  s.session_id = in.session_id;
  s.stated_intent = in.latest_intent.empty() ? "unknown" : in.latest_intent;
  s.completed_steps = in.executed_steps;
  s.retrieved_data_refs = in.allowed_item_refs;
  s.open_questions = in.open_questions;
  s.transcript_ref = "transcript:" + in.session_id;
  return R::success(std::move(s));
}

}  // namespace ambient
