#include "ambient/actuation.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ambient/digest.hpp"

namespace ambient {

std::string to_string(Tier v) {
  switch (v) {
    case Tier::Low:
      return "low";
    case Tier::Medium:
      return "medium";
    case Tier::High:
      return "high";
  }
  return "?";
}

Result<Tier> tier_from_string(const std::string& s) {
  if (s == "low") return Result<Tier>::success(Tier::Low);
  if (s == "medium") return Result<Tier>::success(Tier::Medium);
  if (s == "high") return Result<Tier>::success(Tier::High);
  return Result<Tier>::failure("unknown tier: " + s);
}

std::string to_string(CallStatus v) {
  switch (v) {
    case CallStatus::Ready:
      return "ready";
    case CallStatus::PendingConfirmation:
      return "pending_confirmation";
    case CallStatus::PendingStepUp:
      return "pending_step_up";
    case CallStatus::PendingDualControl:
      return "pending_dual_control";
    case CallStatus::Executed:
      return "executed";
    case CallStatus::Rejected:
      return "rejected";
    case CallStatus::Suspended:
      return "suspended";
  }
  return "?";
}

std::string to_string(InterventionOutcome v) {
  switch (v) {
    case InterventionOutcome::Proceed:
      return "proceed";
    case InterventionOutcome::Clarify:
      return "clarify";
    case InterventionOutcome::RecommendStaff:
      return "recommend_staff";
    case InterventionOutcome::Suspend:
      return "suspend";
  }
  return "?";
}

Result<OperationSchema> operation_schema_from_json(const json& j) {
  using R = Result<OperationSchema>;
  if (!j.is_object()) return R::failure("operation schema: not an object");
  OperationSchema s;
  try {
    s.op_name = j.at("op_name").get<std::string>();
    auto tier = tier_from_string(j.at("tier").get<std::string>());
    if (!tier.ok()) return R::failure(tier.error);
    s.tier = *tier;
    s.dual_control = j.value("dual_control", false);
    s.description = j.value("description", std::string{});
    for (const auto& p : j.value("params", json::array())) {
      ParamSpec spec;
      spec.name = p.at("name").get<std::string>();
      spec.type = p.at("type").get<std::string>();
      spec.required = p.value("required", true);
      if (p.contains("min")) spec.min = p.at("min").get<double>();
      if (p.contains("max")) spec.max = p.at("max").get<double>();
      for (const auto& v : p.value("one_of", json::array()))
        spec.one_of.push_back(v.get<std::string>());
      s.params.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    return R::failure(std::string("operation schema: ") + e.what());
  }
  return R::success(std::move(s));
}

Result<bool> OperationRegistry::register_operation(OperationSchema schema) {
  using R = Result<bool>;
  if (schema.op_name.empty()) return R::failure("schema: empty op_name");
  if (ops_.count(schema.op_name)) return R::failure("duplicate op_name: " + schema.op_name);
  if (schema.dual_control && schema.tier != Tier::High)
    return R::failure("dual control requires high tier");
  std::set<std::string> names;
  for (const auto& p : schema.params) {
    std::string where = "schema " + schema.op_name + ", param " + p.name;
    if (p.name.empty()) return R::failure(where + ": empty name");
    if (!names.insert(p.name).second) return R::failure(where + ": duplicate");
    if (p.type != "string" && p.type != "int" && p.type != "number" && p.type != "bool")
      return R::failure(where + ": unknown type '" + p.type + "'");
    if (p.min && p.max && *p.min > *p.max) return R::failure(where + ": min > max");
  }
  ops_[schema.op_name] = std::move(schema);
  return R::success(true);
}

const OperationSchema* OperationRegistry::find(const std::string& op_name) const {
  auto it = ops_.find(op_name);
  return it == ops_.end() ? nullptr : &it->second;
}

Result<Tier> OperationRegistry::classify_tier(const std::string& op_name) const {
  const OperationSchema* s = find(op_name);
  if (!s) return Result<Tier>::failure("unknown operation: " + op_name);
  return Result<Tier>::success(s->tier);
}

std::vector<std::string> OperationRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : ops_) out.push_back(name);
  return out;
}

OperationRegistry load_registry(const json& list) {
  OperationRegistry registry;
  for (const auto& item : list) {
    auto schema = operation_schema_from_json(item);
    if (!schema.ok()) throw std::runtime_error(schema.error);
    auto reg = registry.register_operation(*schema);
    if (!reg.ok()) throw std::runtime_error(reg.error);
  }
  return registry;
}

json to_json(const ActionCall& c) {
  json j{{"call_id", c.call_id},
         {"op_name", c.op_name},
         {"args", c.args},
         {"session_id", c.session_id},
         {"requested_at_ms", c.requested_at_ms},
         {"status", to_string(c.status)}};
  if (!c.reason.empty()) j["reason"] = c.reason;
  if (c.confirmation)
    j["confirmation"] = {{"confirmed_at_ms", c.confirmation->confirmed_at_ms},
                         {"channel", c.confirmation->channel}};
  if (c.step_up)
    j["step_up"] = {{"verified_at_ms", c.step_up->verified_at_ms},
                    {"method", c.step_up->method}};
  if (c.dual_approval)
    j["dual_approval"] = {{"approved_at_ms", c.dual_approval->approved_at_ms},
                          {"staff_id", c.dual_approval->staff_id}};
  if (c.verified)
    j["verified"] = {{"at_ms", c.verified->at_ms}, {"channel", c.verified->channel}};
  return j;
}

namespace {

bool arg_type_ok(const json& v, const std::string& type) {
  if (type == "string") return v.is_string();
  if (type == "int") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "bool") return v.is_boolean();
  return false;
}

}  // namespace

Result<ActionCall> validate_call(const std::string& op_name, const json& args,
                                 const OperationRegistry& registry,
                                 const std::string& session_id, TimestampMs now_ms,
                                 const std::string& call_id) {
  using R = Result<ActionCall>;
  const OperationSchema* schema = registry.find(op_name);
  if (!schema) return R::failure("not whitelisted: " + op_name);
  if (!args.is_object()) return R::failure("args must be an object");

  for (const auto& p : schema->params) {
    if (!args.contains(p.name)) {
      if (p.required) return R::failure("missing field: " + p.name);
      continue;
    }
    const json& v = args.at(p.name);
    if (!arg_type_ok(v, p.type))
      return R::failure("invalid type for field: " + p.name + " (expected " + p.type + ")");
    if (v.is_number()) {
      double num = v.get<double>();
      if (p.min && num < *p.min) return R::failure("constraint violated: " + p.name + " < min");
      if (p.max && num > *p.max) return R::failure("constraint violated: " + p.name + " > max");
    }
    if (!p.one_of.empty() && v.is_string()) {
      const std::string sv = v.get<std::string>();
      bool found = false;
      for (const auto& allowed : p.one_of) found = found || allowed == sv;
      if (!found) return R::failure("constraint violated: " + p.name + " not in allowed set");
    }
  }
  for (const auto& [key, _] : args.items()) {
    bool known = false;
    for (const auto& p : schema->params) known = known || p.name == key;
    if (!known) return R::failure("unknown field: " + key);
  }

  ActionCall call;
  call.call_id = call_id;
  call.op_name = op_name;
  call.args = args;
  call.session_id = session_id;
  call.requested_at_ms = now_ms;
  call.status =
      schema->tier == Tier::Low ? CallStatus::Ready : CallStatus::PendingConfirmation;
  return R::success(std::move(call));
}

Result<InterventionThresholds> validate_intervention_thresholds(
    const InterventionThresholds& t) {
  auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_range(t.clarify) || !in_range(t.staff) || !in_range(t.suspend))
    return Result<InterventionThresholds>::failure("intervention thresholds must be in [0,1]");
  if (!(t.clarify <= t.staff && t.staff <= t.suspend))
    return Result<InterventionThresholds>::failure(
        "intervention thresholds must satisfy clarify <= staff <= suspend");
  return Result<InterventionThresholds>::success(t);
}

InterventionOutcome evaluate_intervention(const RiskAssessment& risk,
                                          const InterventionThresholds& thresholds) {
  if (risk.score >= thresholds.suspend) return InterventionOutcome::Suspend;
  if (risk.score >= thresholds.staff) return InterventionOutcome::RecommendStaff;
  if (risk.score >= thresholds.clarify) return InterventionOutcome::Clarify;
  return InterventionOutcome::Proceed;
}

const json& AuditLog::append(json body, TimestampMs timestamp_ms) {
  body["seq"] = static_cast<int64_t>(entries_.size() + 1);
  body["timestamp_ms"] = timestamp_ms;
  body["prev_digest"] = last_digest_;
  body.erase("entry_digest");
  std::string digest = sha256_hex(last_digest_ + canonical_dump(body));
  body["entry_digest"] = digest;
  last_digest_ = std::move(digest);
  entries_.push_back(std::move(body));
  return entries_.back();
}

std::string AuditLog::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) {
    out += canonical_dump(e);
    out += '\n';
  }
  return out;
}

void AuditLog::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write audit file: " + path);
  f << to_jsonl();
}

AuditLog::VerifyResult AuditLog::verify(const std::vector<json>& entries) {
  std::string prev = kAuditGenesis;
  int64_t expected_seq = 1;
  for (const auto& entry : entries) {
    VerifyResult bad{false, expected_seq, ""};
    if (!entry.is_object() || !entry.contains("entry_digest") ||
        !entry.contains("prev_digest") || !entry.contains("seq")) {
      bad.reason = "malformed entry";
      return bad;
    }
    if (!entry.at("seq").is_number_integer() ||
        entry.at("seq").get<int64_t>() != expected_seq) {
      bad.reason = "sequence break";
      return bad;
    }
    if (entry.at("prev_digest") != prev) {
      bad.reason = "chain break: prev_digest mismatch";
      return bad;
    }
    json body = entry;
    body.erase("entry_digest");
    std::string recomputed = sha256_hex(prev + canonical_dump(body));
    if (entry.at("entry_digest") != recomputed) {
      bad.reason = "digest mismatch";
      return bad;
    }
    prev = recomputed;
    expected_seq++;
  }
  return {true, 0, ""};
}

AuditLog::VerifyResult AuditLog::verify_jsonl(const std::string& text) {
  std::vector<json> entries;
  std::istringstream in(text);
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty()) continue;
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded()) return {false, lineno, "unparseable entry"};
    entries.push_back(std::move(parsed));
  }
  return verify(entries);
}

AuditLog::VerifyResult AuditLog::verify_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return {false, 0, "cannot open file: " + path};
  std::stringstream buf;
  buf << f.rdbuf();
  return verify_jsonl(buf.str());
}

Result<json> BackendStubs::invoke(const std::string& op_name, const json& args) {
  call_log_.push_back(op_name);
  auto it = backends_.find(op_name);
  if (it == backends_.end()) return Result<json>::failure("no backend for " + op_name);
  return it->second(args);
}

namespace {

json audit_body(const ActionCall& call, const ExecutionContext& ctx) {
  return json{{"call_id", call.call_id},
              {"op_name", call.op_name},
              {"status", to_string(call.status)},
              {"context_digest", ctx.state ? snapshot_hash(*ctx.state) : std::string{}},
              {"consent_state", ctx.consent_purposes}};
}

}  // namespace

ExecutionOutcome execute_call(ActionCall call, const std::optional<RiskAssessment>& risk,
                              const OperationRegistry& registry, BackendStubs& backends,
                              AuditLog& audit, const ExecutionContext& ctx) {
  ExecutionOutcome out;
  const OperationSchema* schema = registry.find(call.op_name);
  if (!schema) {
    call.status = CallStatus::Rejected;
    call.reason = "not whitelisted: " + call.op_name;
    json body = audit_body(call, ctx);
    body["reason"] = call.reason;
    audit.append(std::move(body), ctx.now_ms);
    out.call = std::move(call);
    return out;
  }

  // Prerequisite ladder: confirmation, then step-up, then dual control.
  CallStatus missing = CallStatus::Ready;
  if (schema->tier != Tier::Low && !call.confirmation)
    missing = CallStatus::PendingConfirmation;
  else if (schema->tier == Tier::High && !call.step_up)
    missing = CallStatus::PendingStepUp;
  else if (schema->tier == Tier::High && schema->dual_control && !call.dual_approval)
    missing = CallStatus::PendingDualControl;

  if (missing != CallStatus::Ready) {
    call.status = missing;
    audit.append(audit_body(call, ctx), ctx.now_ms);
    out.call = std::move(call);
    return out;
  }

  // Execution is imminent: run the risk intervention unless a verification
  // event already cleared it.
  if (risk && !call.verified) {
    InterventionOutcome outcome = evaluate_intervention(*risk, ctx.intervention);
    out.intervention = outcome;
    if (outcome != InterventionOutcome::Proceed) {
      if (outcome == InterventionOutcome::Suspend) {
        call.status = CallStatus::Suspended;
        call.reason = "risk intervention: suspended pending verification";
        out.note = "operation suspended pending additional verification";
      } else if (outcome == InterventionOutcome::Clarify) {
        call.status = CallStatus::Ready;  // prerequisites met, awaiting verification
        call.reason = "risk intervention: clarification requested";
        out.note = kClarifyPrompt;
      } else {
        call.status = CallStatus::Ready;
        call.reason = "risk intervention: staff involvement recommended";
        out.note = "recommend involving a staff member before proceeding";
      }
      json body = audit_body(call, ctx);
      body["risk_score"] = risk->score;
      body["intervention"] = to_string(outcome);
      body["reason"] = call.reason;
      audit.append(std::move(body), ctx.now_ms);
      out.call = std::move(call);
      return out;
    }
  }

  auto result = backends.invoke(call.op_name, call.args);
  if (!result.ok()) {
    call.status = CallStatus::Rejected;
    call.reason = "backend failure: " + result.error;
    json body = audit_body(call, ctx);
    body["reason"] = call.reason;
    audit.append(std::move(body), ctx.now_ms);
    out.call = std::move(call);
    return out;
  }

  call.status = CallStatus::Executed;
  call.reason.clear();
  json body = audit_body(call, ctx);
  if (risk) body["risk_score"] = risk->score;
  audit.append(std::move(body), ctx.now_ms);
  out.call = std::move(call);
  out.result = std::move(*result);
  return out;
}

}  // namespace ambient
