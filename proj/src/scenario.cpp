#include "ambient/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ambient/actuation.hpp"

namespace ambient {

namespace {

const std::set<std::string>& known_event_kinds() {
  static const std::set<std::string> kinds = {
      "sensor",      "utterance",    "auth",          "consent",       "confirmation",
      "step_up",     "dual_control", "verification",  "risk_score",    "staff_status",
      "tick",        "session_start", "session_end",  "token_redeem",  "memory_request"};
  return kinds;
}

const std::set<std::string>& known_assertion_kinds() {
  static const std::set<std::string> kinds = {
      "state_equals",   "initiative_level", "surface_routing", "action_status",
      "audit_property", "transcript_contains", "handoff_target"};
  return kinds;
}

}  // namespace

std::vector<std::string> lint_scenario(const json& j) {
  std::vector<std::string> problems;
  if (!j.is_object()) {
    problems.push_back("scenario must be an object");
    return problems;
  }
  if (!j.contains("scenario_id") || !j.at("scenario_id").is_string())
    problems.push_back("missing scenario_id");
  if (!j.contains("events") || !j.at("events").is_array()) {
    problems.push_back("missing events array");
    return problems;
  }
  TimestampMs prev = -1;
  size_t line = 0;
  for (const auto& ev : j.at("events")) {
    line++;
    std::string where = "event " + std::to_string(line);
    if (!ev.is_object()) {
      problems.push_back(where + ": not an object");
      continue;
    }
    if (!ev.contains("at_ms") || !ev.at("at_ms").is_number_integer()) {
      problems.push_back(where + ": missing at_ms");
      continue;
    }
    TimestampMs at = ev.at("at_ms").get<int64_t>();
    if (at < prev)
      problems.push_back("events out of order at event " + std::to_string(line));
    prev = at;
    std::string kind = ev.value("kind", "");
    if (!known_event_kinds().count(kind))
      problems.push_back(where + ": unknown event kind '" + kind + "'");
  }
  size_t idx = 0;
  for (const auto& a : j.value("assertions", json::array())) {
    std::string where = "assertion " + std::to_string(idx++);
    if (!a.is_object()) {
      problems.push_back(where + ": not an object");
      continue;
    }
    std::string kind = a.value("kind", "");
    if (!known_assertion_kinds().count(kind)) {
      problems.push_back(where + ": unknown assertion kind '" + kind + "'");
      continue;
    }
    auto need = [&](const char* field) {
      if (!a.contains(field))
        problems.push_back(where + " (" + kind + "): missing '" + field + "'");
    };
    if (kind == "state_equals") {
      need("variable");
      need("value");
    } else if (kind == "initiative_level") {
      need("level");
    } else if (kind == "surface_routing") {
      need("item_id");
      need("surface_id");
    } else if (kind == "action_status") {
      need("op_name");
      need("status");
    } else if (kind == "audit_property") {
      need("property");
    } else if (kind == "transcript_contains") {
      need("text");
    } else if (kind == "handoff_target") {
      need("staff_id");
    }
  }
  return problems;
}

Result<Scenario> scenario_from_json(const json& j) {
  using R = Result<Scenario>;
  auto problems = lint_scenario(j);
  if (!problems.empty()) return R::failure(problems.front());

  Scenario s;
  s.scenario_id = j.at("scenario_id").get<std::string>();
  s.description = j.value("description", std::string{});
  s.seed = j.value("seed", uint64_t{0});
  s.session = j.value("session", json::object());
  s.config = j.value("config", json::object());
  s.fixtures = j.value("fixtures", json::object());
  for (const auto& surface : j.value("surfaces", json::array())) s.surfaces.push_back(surface);
  for (const auto& reg : j.value("registrations", json::array()))
    s.registrations.push_back(reg);
  for (const auto& consent : j.value("consents", json::array())) s.consents.push_back(consent);

  size_t line = 0;
  for (const auto& ev : j.at("events")) {
    line++;
    ScenarioEvent event;
    event.at_ms = ev.at("at_ms").get<int64_t>();
    event.kind = ev.at("kind").get<std::string>();
    event.fields = ev;
    event.fields.erase("at_ms");
    event.fields.erase("kind");
    event.line = line;
    s.events.push_back(std::move(event));
  }
  for (const auto& a : j.value("assertions", json::array())) {
    Assertion assertion;
    assertion.kind = a.at("kind").get<std::string>();
    assertion.expect = a;
    assertion.expect.erase("kind");
    s.assertions.push_back(std::move(assertion));
  }
  return R::success(std::move(s));
}

Result<Scenario> load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) return Result<Scenario>::failure("cannot open scenario: " + path);
  json parsed = json::parse(f, nullptr, false);
  if (parsed.is_discarded())
    return Result<Scenario>::failure("scenario parse error: " + path);
  return scenario_from_json(parsed);
}

bool RunReport::all_assertions_pass() const {
  for (const auto& r : assertion_results)
    if (!r.pass) return false;
  return true;
}

json RunReport::to_canonical() const {
  json results = json::array();
  for (const auto& r : assertion_results)
    results.push_back(json{
        {"index", r.index}, {"kind", r.kind}, {"pass", r.pass}, {"detail", r.detail}});
  return json{{"scenario_id", scenario_id},
              {"seed", seed},
              {"transcript", transcript},
              {"state_timeline", state_timeline},
              {"initiative", initiative_log},
              {"policy", policy_log},
              {"interventions", intervention_log},
              {"deliveries", deliveries},
              {"handoffs", handoffs},
              {"tokens", token_events},
              {"events", event_log},
              {"calls", calls},
              {"stub_calls", stub_calls},
              {"rejections", rejections},
              {"audit", audit_jsonl},
              {"assertions", results}};
}

std::string RunReport::to_text() const {
  std::ostringstream out;
  out << "scenario: " << scenario_id << " (seed " << seed << ")\n";
  out << "events processed: " << event_log.size() << ", turns: " << transcript.size()
      << ", deliveries: " << deliveries.size() << "\n";
  out << "transcript:\n";
  for (const auto& t : transcript)
    out << "  [" << t.value("timestamp_ms", int64_t{0}) << "ms] " << t.value("role", "?")
        << ": " << t.value("text", "") << "\n";
  if (!deliveries.empty()) {
    out << "deliveries:\n";
    for (const auto& d : deliveries)
      out << "  [" << d.value("at_ms", int64_t{0}) << "ms] " << d.value("item_id", "?")
          << " -> " << d.value("surface_id", "?") << (d.value("pii", false) ? " (pii)" : "")
          << ": " << d.value("body", "") << "\n";
  }
  if (!handoffs.empty()) {
    out << "handoffs:\n";
    for (const auto& h : handoffs)
      out << "  [" << h.value("at_ms", int64_t{0}) << "ms] -> " << h.value("staff_id", "?")
          << "\n";
  }
  size_t passed = 0;
  for (const auto& r : assertion_results) passed += r.pass ? 1 : 0;
  out << "assertions: " << passed << "/" << assertion_results.size() << " passed\n";
  for (const auto& r : assertion_results) {
    out << "  [" << (r.pass ? "PASS" : "FAIL") << "] #" << r.index << " " << r.kind;
    if (!r.pass) out << " — " << r.detail;
    out << "\n";
  }
  out << "wall time: " << wall_time_ms << " ms\n";
  return out.str();
}

std::string emit_report(const RunReport& report, const std::string& format) {
  if (format == "json") return canonical_dump(report.to_canonical());
  return report.to_text();
}

namespace {

std::string diff(const json& expected, const json& actual) {
  return "expected " + canonical_dump(expected) + ", actual " + canonical_dump(actual);
}

}  // namespace

std::vector<AssertionResult> check_assertions(const RunReport& report,
                                              const Scenario& scenario) {
  std::vector<AssertionResult> results;
  for (size_t i = 0; i < scenario.assertions.size(); i++) {
    const Assertion& a = scenario.assertions[i];
    const json& e = a.expect;
    AssertionResult r;
    r.index = i;
    r.kind = a.kind;

    if (a.kind == "state_equals") {
      std::string variable = e.at("variable").get<std::string>();
      std::optional<TimestampMs> at;
      if (e.contains("at_ms")) at = e.at("at_ms").get<int64_t>();
      const json* snapshot = nullptr;
      for (const auto& entry : report.state_timeline) {
        if (at && entry.at("at_ms").get<int64_t>() > *at) break;
        snapshot = &entry;
      }
      if (!snapshot) {
        r.detail = "no state snapshot at or before requested time";
      } else if (!snapshot->at("variables").contains(variable)) {
        r.detail = "variable '" + variable + "' absent; " +
                   diff(e.at("value"), json(nullptr));
      } else {
        const json& entry = snapshot->at("variables").at(variable);
        bool value_ok = entry.at("value") == e.at("value");
        bool conf_ok = !e.contains("min_confidence") ||
                       entry.at("confidence").get<double>() >=
                           e.at("min_confidence").get<double>();
        r.pass = value_ok && conf_ok;
        if (!r.pass) r.detail = diff(e.at("value"), entry);
      }
    } else if (a.kind == "initiative_level") {
      std::string level = e.at("level").get<std::string>();
      json last = nullptr;
      for (const auto& d : report.initiative_log) {
        if (e.contains("trigger_id") && d.value("trigger_id", "") != e.at("trigger_id")) continue;
        if (e.contains("at_ms") && d.value("decided_at_ms", int64_t{0}) != e.at("at_ms"))
          continue;
        last = d;
      }
      if (last.is_null()) {
        r.detail = "no matching initiative decision; expected level " + level;
      } else {
        r.pass = last.value("level", "") == level;
        if (!r.pass) r.detail = diff(json(level), last);
      }
    } else if (a.kind == "surface_routing") {
      std::string item_id = e.at("item_id").get<std::string>();
      std::string surface_id = e.at("surface_id").get<std::string>();
      json found = nullptr;
      for (const auto& d : report.deliveries) {
        if (d.value("item_id", "") != item_id) continue;
        if (d.value("surface_id", "") != surface_id) continue;
        if (e.contains("placeholder") &&
            (d.value("body", "") == "details sent to your device") !=
                e.at("placeholder").get<bool>())
          continue;
        found = d;
      }
      r.pass = !found.is_null();
      if (!r.pass)
        r.detail = "no delivery of '" + item_id + "' to '" + surface_id + "'";
    } else if (a.kind == "action_status") {
      std::string op = e.at("op_name").get<std::string>();
      std::string status = e.at("status").get<std::string>();
      json last = nullptr;
      for (const auto& c : report.calls)
        if (c.value("op_name", "") == op) last = c;
      if (last.is_null()) {
        r.detail = "no call for op '" + op + "'";
      } else {
        r.pass = last.value("status", "") == status;
        if (!r.pass) r.detail = diff(json(status), last);
      }
    } else if (a.kind == "audit_property") {
      std::string property = e.at("property").get<std::string>();
      if (property == "chain_verifies") {
        auto v = AuditLog::verify_jsonl(report.audit_jsonl);
        r.pass = v.ok;
        if (!r.pass)
          r.detail = "audit chain broken at seq " + std::to_string(v.failed_seq) + ": " +
                     v.reason;
      } else if (property == "executed_count") {
        int64_t count = 0;
        std::istringstream in(report.audit_jsonl);
        std::string line;
        while (std::getline(in, line)) {
          if (line.empty()) continue;
          json entry = json::parse(line, nullptr, false);
          if (entry.is_discarded()) continue;
          if (entry.value("status", "") != "executed") continue;
          if (e.contains("op_name") && entry.value("op_name", "") != e.at("op_name")) continue;
          count++;
        }
        r.pass = count == e.at("value").get<int64_t>();
        if (!r.pass) r.detail = diff(e.at("value"), json(count));
      } else {
        r.detail = "unknown audit property: " + property;
      }
    } else if (a.kind == "transcript_contains") {
      std::string text = e.at("text").get<std::string>();
      for (const auto& t : report.transcript) {
        if (e.contains("role") && t.value("role", "") != e.at("role")) continue;
        if (t.value("text", "").find(text) != std::string::npos) {
          r.pass = true;
          break;
        }
      }
      if (!r.pass) r.detail = "transcript does not contain '" + text + "'";
    } else if (a.kind == "handoff_target") {
      std::string staff = e.at("staff_id").get<std::string>();
      for (const auto& h : report.handoffs)
        if (h.value("staff_id", "") == staff) r.pass = true;
      if (!r.pass) r.detail = "no handoff to '" + staff + "'";
    } else {
      r.detail = "unknown assertion kind";
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace ambient
