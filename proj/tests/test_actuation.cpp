#include <doctest.h>

#include <random>

#include "ambient/actuation.hpp"
#include "ambient/digest.hpp"
#include "ambient/engine.hpp"

using namespace ambient;

namespace {

OperationRegistry default_registry() { return load_registry(default_operations_json()); }

BackendStubs stub_backends(const OperationRegistry& registry) {
  BackendStubs b;
  for (const auto& name : registry.names())
    b.register_backend(name, [](const json&) { return Result<json>::success(json{{"ok", true}}); });
  return b;
}

ExecutionContext context_at(const SituationalState& state, TimestampMs now) {
  ExecutionContext ctx;
  ctx.state = &state;
  ctx.consent_purposes = {"transaction-history"};
  ctx.now_ms = now;
  return ctx;
}

ActionCall valid_call(const OperationRegistry& registry, const std::string& op, json args,
                      const std::string& id = "call-1") {
  auto r = validate_call(op, args, registry, "s1", 100, id);
  REQUIRE(r.ok());
  return *r;
}

}  // namespace

TEST_CASE("register_operation: duplicates and invalid schemas are rejected") {
  OperationRegistry registry;
  OperationSchema block;
  block.op_name = "block_card";
  block.tier = Tier::Medium;
  block.params = {{"card_id", "string", true, {}, {}, {}}};
  CHECK(registry.register_operation(block).ok());
  CHECK(registry.has("block_card"));

  CHECK_FALSE(registry.register_operation(block).ok());  // duplicate

  OperationSchema bad;
  bad.op_name = "weird";
  bad.tier = Tier::Low;
  bad.dual_control = true;
  auto r = registry.register_operation(bad);
  REQUIRE_FALSE(r.ok());
  CHECK(r.error == "dual control requires high tier");

  OperationSchema bad_param;
  bad_param.op_name = "p";
  bad_param.tier = Tier::Low;
  bad_param.params = {{"x", "matrix", true, {}, {}, {}}};
  CHECK_FALSE(registry.register_operation(bad_param).ok());
}

TEST_CASE("classify_tier reflects the default registry") {
  auto registry = default_registry();
  CHECK(*registry.classify_tier("queue_status") == Tier::Low);
  CHECK(*registry.classify_tier("generate_summary_document") == Tier::Medium);
  CHECK(*registry.classify_tier("transfer_funds") == Tier::High);
  CHECK_FALSE(registry.classify_tier("rm_rf_everything").ok());
}

TEST_CASE("validate_call: whitelist and schema enforcement") {
  auto registry = default_registry();

  auto ok = validate_call("block_card", json{{"card_id", "C1"}}, registry, "s1", 10, "c1");
  REQUIRE(ok.ok());
  CHECK(ok->status == CallStatus::PendingConfirmation);

  auto low = validate_call("queue_status", json::object(), registry, "s1", 10, "c2");
  REQUIRE(low.ok());
  CHECK(low->status == CallStatus::Ready);

  auto unknown = validate_call("rm_rf_everything", json::object(), registry, "s1", 10, "c3");
  REQUIRE_FALSE(unknown.ok());
  CHECK(unknown.error.find("not whitelisted") == 0);

  auto missing = validate_call("transfer_funds", json{{"to_account", "X"}}, registry, "s1",
                               10, "c4");
  REQUIRE_FALSE(missing.ok());
  CHECK(missing.error == "missing field: amount");

  auto wrong_type = validate_call("block_card", json{{"card_id", 7}}, registry, "s1", 10, "c5");
  REQUIRE_FALSE(wrong_type.ok());
  CHECK(wrong_type.error.find("invalid type") == 0);

  auto negative = validate_call("transfer_funds",
                                json{{"amount", -5.0}, {"to_account", "X"}}, registry, "s1",
                                10, "c6");
  REQUIRE_FALSE(negative.ok());
  CHECK(negative.error.find("constraint violated") == 0);

  auto extra = validate_call("queue_status", json{{"surprise", 1}}, registry, "s1", 10, "c7");
  REQUIRE_FALSE(extra.ok());
}

TEST_CASE("low tier executes immediately with one audit entry") {
  auto registry = default_registry();
  auto backends = stub_backends(registry);
  AuditLog audit;
  SituationalState state;
  state.session_id = "s1";

  auto call = valid_call(registry, "queue_status", json::object());
  auto outcome = execute_call(call, std::nullopt, registry, backends, audit, context_at(state, 100));
  CHECK(outcome.call.status == CallStatus::Executed);
  REQUIRE(audit.entries().size() == 1);
  CHECK(audit.entries()[0].at("status") == "executed");
  CHECK(backends.call_log().size() == 1);
}

TEST_CASE("medium tier waits for confirmation; no backend effect while pending") {
  auto registry = default_registry();
  auto backends = stub_backends(registry);
  AuditLog audit;
  SituationalState state;

  auto call = valid_call(registry, "block_card", json{{"card_id", "C1"}});
  auto pending = execute_call(call, std::nullopt, registry, backends, audit,
                              context_at(state, 100));
  CHECK(pending.call.status == CallStatus::PendingConfirmation);
  CHECK(backends.call_log().empty());

  pending.call.confirmation = Confirmation{150, "kiosk"};
  auto done = execute_call(pending.call, std::nullopt, registry, backends, audit,
                           context_at(state, 150));
  CHECK(done.call.status == CallStatus::Executed);
  CHECK(backends.call_log().size() == 1);
  REQUIRE(audit.entries().size() == 2);
  CHECK(audit.entries()[0].at("status") == "pending_confirmation");
  CHECK(audit.entries()[1].at("status") == "executed");
}

TEST_CASE("high tier: confirmation then step-up then dual control") {
  auto registry = default_registry();
  auto backends = stub_backends(registry);
  AuditLog audit;
  SituationalState state;

  auto call = valid_call(registry, "transfer_funds",
                         json{{"amount", 120.0}, {"to_account", "ACC-9"}});
  auto s1 = execute_call(call, std::nullopt, registry, backends, audit, context_at(state, 1));
  CHECK(s1.call.status == CallStatus::PendingConfirmation);

  s1.call.confirmation = Confirmation{2, "kiosk"};
  auto s2 = execute_call(s1.call, std::nullopt, registry, backends, audit, context_at(state, 2));
  CHECK(s2.call.status == CallStatus::PendingStepUp);
  CHECK(backends.call_log().empty());

  s2.call.step_up = StepUpVerification{3, "biometric"};
  auto s3 = execute_call(s2.call, std::nullopt, registry, backends, audit, context_at(state, 3));
  CHECK(s3.call.status == CallStatus::PendingDualControl);  // transfer_funds is dual-control
  CHECK(backends.call_log().empty());

  s3.call.dual_approval = DualApproval{4, "staff-7"};
  auto s4 = execute_call(s3.call, std::nullopt, registry, backends, audit, context_at(state, 4));
  CHECK(s4.call.status == CallStatus::Executed);
  CHECK(backends.call_log().size() == 1);

  // update_account is high tier without dual control
  auto update = valid_call(registry, "update_account",
                           json{{"field", "email"}, {"value", "x@y"}}, "call-2");
  update.confirmation = Confirmation{5, "kiosk"};
  update.step_up = StepUpVerification{6, "biometric"};
  auto done = execute_call(update, std::nullopt, registry, backends, audit,
                           context_at(state, 6));
  CHECK(done.call.status == CallStatus::Executed);
}

TEST_CASE("backend failure is audited as rejected") {
  auto registry = default_registry();
  BackendStubs backends;
  backends.register_backend("queue_status", [](const json&) {
    return Result<json>::failure("ticket system offline");
  });
  AuditLog audit;
  SituationalState state;
  auto call = valid_call(registry, "queue_status", json::object());
  auto outcome = execute_call(call, std::nullopt, registry, backends, audit,
                              context_at(state, 9));
  CHECK(outcome.call.status == CallStatus::Rejected);
  CHECK(outcome.call.reason.find("ticket system offline") != std::string::npos);
  CHECK(audit.entries().back().at("status") == "rejected");
}

TEST_CASE("evaluate_intervention: graduated thresholds") {
  InterventionThresholds t;  // 0.25 / 0.6 / 0.85
  auto at = [&](double score) {
    RiskAssessment r;
    r.score = score;
    return evaluate_intervention(r, t);
  };
  CHECK(at(0.1) == InterventionOutcome::Proceed);
  CHECK(at(0.3) == InterventionOutcome::Clarify);
  CHECK(at(0.7) == InterventionOutcome::RecommendStaff);
  CHECK(at(0.9) == InterventionOutcome::Suspend);
  // boundaries are inclusive upward
  CHECK(at(0.25) == InterventionOutcome::Clarify);
  CHECK(at(0.6) == InterventionOutcome::RecommendStaff);
  CHECK(at(0.85) == InterventionOutcome::Suspend);

  InterventionThresholds bad;
  bad.clarify = 0.9;
  bad.staff = 0.2;
  CHECK_FALSE(validate_intervention_thresholds(bad).ok());
}

TEST_CASE("suspend diverts execution before any backend effect") {
  auto registry = default_registry();
  auto backends = stub_backends(registry);
  AuditLog audit;
  SituationalState state;

  auto call = valid_call(registry, "transfer_funds",
                         json{{"amount", 9500.0}, {"to_account", "EXT-1"}});
  call.confirmation = Confirmation{2, "kiosk"};
  call.step_up = StepUpVerification{3, "biometric"};
  call.dual_approval = DualApproval{4, "staff-7"};

  RiskAssessment risk;
  risk.score = 0.9;
  risk.indicators = {"amount above profile"};
  auto outcome = execute_call(call, risk, registry, backends, audit, context_at(state, 5));
  CHECK(outcome.call.status == CallStatus::Suspended);
  CHECK(outcome.intervention == InterventionOutcome::Suspend);
  CHECK(backends.call_log().empty());
  CHECK(audit.entries().back().at("status") == "suspended");
  CHECK(audit.entries().back().at("intervention") == "suspend");

  // verification clears the hold
  outcome.call.verified = IntentVerification{6, "kiosk"};
  auto cleared = execute_call(outcome.call, risk, registry, backends, audit,
                              context_at(state, 6));
  CHECK(cleared.call.status == CallStatus::Executed);
  CHECK(backends.call_log().size() == 1);
}

TEST_CASE("clarify attaches the verification prompt and blocks execution") {
  auto registry = default_registry();
  auto backends = stub_backends(registry);
  AuditLog audit;
  SituationalState state;

  auto call = valid_call(registry, "block_card", json{{"card_id", "C1"}});
  call.confirmation = Confirmation{2, "kiosk"};
  RiskAssessment risk;
  risk.score = 0.3;
  auto outcome = execute_call(call, risk, registry, backends, audit, context_at(state, 3));
  CHECK(outcome.intervention == InterventionOutcome::Clarify);
  CHECK(outcome.note == kClarifyPrompt);
  CHECK(outcome.call.status != CallStatus::Executed);
  CHECK(backends.call_log().empty());
}

TEST_CASE("audit chain: genesis, chaining, tamper detection") {
  AuditLog log;
  log.append(json{{"call_id", "c1"}, {"op_name", "a"}, {"status", "executed"}}, 10);
  REQUIRE(log.entries().size() == 1);
  CHECK(log.entries()[0].at("seq") == 1);
  CHECK(log.entries()[0].at("prev_digest") == kAuditGenesis);

  for (int i = 2; i <= 5; i++)
    log.append(json{{"call_id", "c" + std::to_string(i)}, {"op_name", "a"},
                    {"status", "executed"}},
               10 * i);
  CHECK(AuditLog::verify(log.entries()).ok);

  // flip one byte inside entry 3
  auto tampered = log.entries();
  std::string body = canonical_dump(tampered[2]);
  body[body.find("c3") + 1] = '9';
  tampered[2] = json::parse(body);
  auto v = AuditLog::verify(tampered);
  CHECK_FALSE(v.ok);
  CHECK(v.failed_seq == 3);
}

TEST_CASE("100-entry log re-verifies via an independent chain replay") {
  AuditLog log;
  for (int i = 1; i <= 100; i++)
    log.append(json{{"call_id", "c" + std::to_string(i)},
                    {"op_name", i % 2 ? "queue_status" : "block_card"},
                    {"status", i % 3 ? "executed" : "pending_confirmation"}},
               i * 7);
  CHECK(AuditLog::verify(log.entries()).ok);

  // independent replay: recompute the chain with direct digest calls
  std::string prev(64, '0');
  for (const auto& entry : log.entries()) {
    json body = entry;
    body.erase("entry_digest");
    std::string expected = sha256_hex(prev + canonical_dump(body));
    CHECK(entry.at("entry_digest") == expected);
    prev = expected;
  }

  // jsonl round trip
  CHECK(AuditLog::verify_jsonl(log.to_jsonl()).ok);
}

TEST_CASE("tier gating fuzz: executed entries always carry prerequisites") {
  auto registry = default_registry();
  std::mt19937_64 rng(4242);
  auto names = registry.names();
  SituationalState state;
  state.session_id = "fuzz";

  AuditLog audit;
  auto backends = stub_backends(registry);
  std::vector<ActionCall> executed_calls;

  for (int i = 0; i < 500; i++) {
    const std::string& op = names[rng() % names.size()];
    json args = json::object();
    const OperationSchema* schema = registry.find(op);
    for (const auto& p : schema->params) {
      if (!p.required && rng() % 2) continue;
      if (p.type == "string") args[p.name] = "v" + std::to_string(rng() % 10);
      if (p.type == "number") args[p.name] = double(1 + rng() % 1000);
      if (p.type == "int") args[p.name] = int64_t(rng() % 1000);
      if (p.type == "bool") args[p.name] = (rng() % 2) == 0;
    }
    auto call = validate_call(op, args, registry, "fuzz", i, "f" + std::to_string(i));
    if (!call.ok()) continue;
    // randomly attach prerequisites
    if (rng() % 2) call->confirmation = Confirmation{int64_t(i), "kiosk"};
    if (rng() % 2) call->step_up = StepUpVerification{int64_t(i), "biometric"};
    if (rng() % 2) call->dual_approval = DualApproval{int64_t(i), "staff-1"};
    auto outcome = execute_call(*call, std::nullopt, registry, backends, audit,
                                context_at(state, i));
    if (outcome.call.status == CallStatus::Executed) executed_calls.push_back(outcome.call);
  }

  // audit-side check: every executed entry satisfies its tier's prerequisites
  std::map<std::string, const ActionCall*> by_id;
  for (const auto& c : executed_calls) by_id[c.call_id] = &c;
  for (const auto& entry : audit.entries()) {
    if (entry.at("status") != "executed") continue;
    const ActionCall* call = by_id[entry.at("call_id").get<std::string>()];
    REQUIRE(call);
    Tier tier = *registry.classify_tier(call->op_name);
    if (tier != Tier::Low) CHECK(call->confirmation.has_value());
    if (tier == Tier::High) {
      CHECK(call->step_up.has_value());
      if (registry.find(call->op_name)->dual_control) CHECK(call->dual_approval.has_value());
    }
  }
  CHECK(AuditLog::verify(audit.entries()).ok);

  // whitelist totality: stubs were only ever invoked for registered ops
  for (const auto& op : backends.call_log()) CHECK(registry.has(op));
}
