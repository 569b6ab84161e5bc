#include "ambient/engine.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "ambient/digest.hpp"

namespace ambient {

namespace {

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) return json();
  json parsed = json::parse(f, nullptr, false);
  return parsed.is_discarded() ? json() : parsed;
}

int64_t minutes_away(TimestampMs at_ms, TimestampMs now_ms) {
  int64_t delta = at_ms - now_ms;
  if (delta < 0) delta = 0;
  return (delta + 30000) / 60000;  // round to nearest minute
}

}  // namespace

json default_policy_table_json() {
  return json{
      {"entries",
       json::array(
           {{{"data_class", "public"},
             {"min_auth", "anonymous"},
             {"consent_required", false},
             {"purposes", json::array({"*"})}},
            {{"data_class", "internal"},
             {"min_auth", "authenticated"},
             {"consent_required", false},
             {"purposes", json::array({"appointment-lookup", "session-context",
                                       "account-servicing", "service-history", "preferences",
                                       "memory-recall"})}},
            {{"data_class", "confidential"},
             {"min_auth", "authenticated"},
             {"consent_required", true},
             {"purposes",
              json::array({"service-history", "account-servicing", "preferences"})}},
            {{"data_class", "restricted"},
             {"min_auth", "authenticated"},
             {"consent_required", true},
             {"purposes", json::array({"transaction-history"})}}})}};
}

json default_operations_json() {
  auto op = [](const char* name, const char* tier, bool dual, json params,
               const char* description) {
    return json{{"op_name", name},
                {"tier", tier},
                {"dual_control", dual},
                {"params", std::move(params)},
                {"description", description}};
  };
  return json::array({
      op("queue_status", "low", false, json::array(), "current queue status"),
      op("wayfinding", "low", false,
         json::array({json{{"name", "destination"}, {"type", "string"}}}),
         "directions inside the branch"),
      op("block_card", "medium", false,
         json::array({json{{"name", "card_id"}, {"type", "string"}}}), "block a payment card"),
      op("schedule_appointment", "medium", false,
         json::array({json{{"name", "purpose"}, {"type", "string"}},
                      json{{"name", "at_ms"}, {"type", "int"}, {"required", false}}}),
         "book an appointment"),
      op("generate_summary_document", "medium", false,
         json::array({json{{"name", "topic"}, {"type", "string"}, {"required", false}}}),
         "generate a summary document"),
      op("submit_service_request", "medium", false,
         json::array({json{{"name", "category"}, {"type", "string"}}}),
         "submit a service request"),
      op("prefill_form", "medium", false,
         json::array({json{{"name", "form"}, {"type", "string"}}}), "prefill a form"),
      op("transfer_funds", "high", true,
         json::array({json{{"name", "amount"}, {"type", "number"}, {"min", 0.01}},
                      json{{"name", "to_account"}, {"type", "string"}}}),
         "transfer funds between accounts"),
      op("update_account", "high", false,
         json::array({json{{"name", "field"}, {"type", "string"}},
                      json{{"name", "value"}, {"type", "string"}}}),
         "update account details"),
  });
}

EngineConfig default_engine_config() {
  EngineConfig c;

  auto var_defaults = [&](VariableName v, double tau, int64_t ttl) {
    c.fusion.decay_tau_ms[v] = tau;
    c.fusion.ttl_ms[v] = ttl;
  };
  var_defaults(VariableName::UserPresent, 60000, 120000);
  var_defaults(VariableName::UserPosition, 30000, 60000);
  var_defaults(VariableName::ActivityState, 15000, 30000);
  var_defaults(VariableName::Occupancy, 60000, 300000);
  var_defaults(VariableName::NoiseLevel, 60000, 300000);
  var_defaults(VariableName::Appointment, 600000, 3600000);
  var_defaults(VariableName::AdvisorAvailability, 120000, 600000);
  var_defaults(VariableName::QueueLength, 120000, 600000);
  var_defaults(VariableName::WorkflowStage, 600000, 3600000);

  // Localization accuracy bands as default per-source quality handled at the
  // sources level; weights stay 1.0 unless configured.
  auto policy = load_policy_table(default_policy_table_json());
  c.policy = *policy;

  c.registry = load_registry(default_operations_json());

  TriggerConfig t;
  t.specs.push_back({"silence-1", TriggerKind::TemporalSilence,
                     json{{"silence_threshold_ms", 2000}}});
  t.specs.push_back({"waiting-1", TriggerKind::BehavioralCue, json{{"cue", "waiting"}}});
  t.specs.push_back({"appt-soon-1", TriggerKind::SituationalEvent,
                     json{{"event", "appointment_soon"}, {"horizon_ms", 300000}}});
  t.specs.push_back({"queue-pos-1", TriggerKind::SituationalEvent,
                     json{{"event", "queue_position"}, {"max_position", 2}}});
  c.triggers = std::move(t);

  RetentionTable r;
  r.purpose_to_class["service-history"] = RetentionClass::Days365;
  r.purpose_to_class["preferences"] = RetentionClass::UntilRevoked;
  r.purpose_to_class["transcripts"] = RetentionClass::SessionOnly;
  c.retention = std::move(r);

  c.intents = default_intent_table();

  SourceRegistration branch{"branch-mgmt", Layer::Enterprise, 0, 0, 1.0};
  c.sources[branch.source_id] = branch;
  return c;
}

Result<bool> apply_config_overrides(EngineConfig& config, const json& overrides) {
  using R = Result<bool>;
  if (overrides.is_null() || (overrides.is_object() && overrides.empty()))
    return R::success(true);
  if (!overrides.is_object()) return R::failure("config overrides must be an object");

  if (overrides.contains("fusion")) {
    auto fusion = fusion_config_from_json(overrides.at("fusion"));
    if (!fusion.ok()) return R::failure(fusion.error);
    // keep per-variable defaults unless overridden
    FusionConfig merged = config.fusion;
    const FusionConfig& o = *fusion;
    merged.disagreement_penalty = o.disagreement_penalty;
    merged.default_weight = o.default_weight;
    merged.activity_window_ms = o.activity_window_ms;
    merged.staff_served_count = o.staff_served_count;
    merged.per_customer_service_s = o.per_customer_service_s;
    for (const auto& [k, v] : o.weights) merged.weights[k] = v;
    for (const auto& [k, v] : o.decay_tau_ms) merged.decay_tau_ms[k] = v;
    for (const auto& [k, v] : o.ttl_ms) merged.ttl_ms[k] = v;
    config.fusion = std::move(merged);
  }
  if (overrides.contains("policy")) {
    auto policy = load_policy_table(overrides.at("policy"));
    if (!policy.ok()) return R::failure(policy.error);
    config.policy = *policy;
  }
  if (overrides.contains("operations")) {
    try {
      config.registry = load_registry(overrides.at("operations"));
    } catch (const std::exception& e) {
      return R::failure(e.what());
    }
  }
  if (overrides.contains("triggers")) {
    auto triggers = trigger_config_from_json(overrides.at("triggers"));
    if (!triggers.ok()) return R::failure(triggers.error);
    config.triggers = *triggers;
  }
  if (overrides.contains("intervention")) {
    const json& iv = overrides.at("intervention");
    InterventionThresholds t;
    t.clarify = iv.value("clarify", 0.25);
    t.staff = iv.value("staff", 0.6);
    t.suspend = iv.value("suspend", 0.85);
    auto ok = validate_intervention_thresholds(t);
    if (!ok.ok()) return R::failure(ok.error);
    config.intervention = t;
  }
  if (overrides.contains("intents")) {
    auto intents = intent_table_from_json(overrides.at("intents"));
    if (!intents.ok()) return R::failure(intents.error);
    config.intents = *intents;
  }
  if (overrides.contains("retention")) {
    auto retention = retention_table_from_json(overrides.at("retention"));
    if (!retention.ok()) return R::failure(retention.error);
    config.retention = *retention;
  }
  if (overrides.contains("sources")) {
    try {
      config.sources = load_registrations(overrides.at("sources"));
    } catch (const std::exception& e) {
      return R::failure(e.what());
    }
  }
  if (overrides.contains("persona")) config.persona = overrides.at("persona").get<std::string>();
  if (overrides.contains("token_ttl_ms"))
    config.token_ttl_ms = overrides.at("token_ttl_ms").get<int64_t>();
  return R::success(true);
}

Result<EngineConfig> load_engine_config(const std::string& config_dir) {
  EngineConfig config = default_engine_config();
  if (config_dir.empty()) return Result<EngineConfig>::success(std::move(config));
  namespace fs = std::filesystem;
  json overrides = json::object();
  auto maybe = [&](const char* file, const char* key) {
    fs::path p = fs::path(config_dir) / file;
    if (fs::exists(p)) overrides[key] = read_json_file(p.string());
  };
  maybe("fusion.json", "fusion");
  maybe("policy.json", "policy");
  maybe("operations.json", "operations");
  maybe("triggers.json", "triggers");
  maybe("intents.json", "intents");
  maybe("retention.json", "retention");
  maybe("sources.json", "sources");
  auto applied = apply_config_overrides(config, overrides);
  if (!applied.ok()) return Result<EngineConfig>::failure(applied.error);
  return Result<EngineConfig>::success(std::move(config));
}

Engine::Engine(EngineConfig config, uint64_t seed, json fixtures)
    : config_(std::move(config)),
      seed_(seed),
      rng_(seed),
      stubs_(std::move(fixtures)) {
  // Run-local signing secret; derived from the seed so replays are
  // byte-identical.
  run_secret_ = sha256_hex("run-secret:" + std::to_string(seed));
  report_.seed = seed;
  register_default_backends();

  // Per-op risk fixtures preload the assessment table.
  const json& risk = stubs_.fixtures().value("risk", json::object());
  for (const auto& [op, entry] : risk.items()) {
    RiskAssessment a;
    a.call_id = "";
    a.score = entry.value("score", 0.0);
    for (const auto& ind : entry.value("indicators", json::array()))
      a.indicators.push_back(ind.get<std::string>());
    risk_by_op_[op] = std::move(a);
  }
  const json& staff = stubs_.fixtures().value("staff", json::array());
  for (const auto& s : staff) {
    auto member = staff_from_json(s);
    if (member.ok()) roster_[member->staff_id] = *member;
  }
}

void Engine::add_surface(const Surface& surface) { surfaces_[surface.surface_id] = surface; }

void Engine::seed_consents(const std::vector<json>& consents) {
  for (const auto& c : consents) {
    auto record = consent_from_json(c);
    if (record.ok()) consents_.grant(*record);
  }
}

void Engine::seed_memory(const json& entries) {
  if (!entries.is_array()) return;
  for (const auto& e : entries) {
    auto entry = memory_entry_from_json(e);
    if (entry.ok()) memory_.add(*entry);
  }
}

std::string Engine::next_id(const std::string& prefix) {
  uint64_t n = ++id_counters_[prefix];
  return prefix + "-" + std::to_string(n);
}

void Engine::register_default_backends() {
  auto counter = std::make_shared<uint64_t>(0);
  backends_.register_backend("queue_status", [this](const json&) {
    auto q = stubs_.query("queue", "");
    return Result<json>::success(q.found ? q.record : json{{"count", 0}});
  });
  backends_.register_backend("wayfinding", [](const json& args) {
    return Result<json>::success(
        json{{"route", "follow the floor markings to " + args.value("destination", "the desk")}});
  });
  backends_.register_backend("block_card", [](const json& args) {
    return Result<json>::success(json{{"blocked", args.value("card_id", "")}});
  });
  backends_.register_backend("schedule_appointment", [](const json& args) {
    return Result<json>::success(json{{"scheduled", args.value("purpose", "visit")}});
  });
  backends_.register_backend("generate_summary_document", [counter](const json&) {
    return Result<json>::success(json{{"document_id", "doc-" + std::to_string(++*counter)}});
  });
  backends_.register_backend("submit_service_request", [counter](const json& args) {
    return Result<json>::success(json{{"request_id", "sr-" + std::to_string(++*counter)},
                                      {"category", args.value("category", "general")}});
  });
  backends_.register_backend("prefill_form", [](const json& args) {
    return Result<json>::success(json{{"prefilled", args.value("form", "")}});
  });
  backends_.register_backend("transfer_funds", [counter](const json& args) {
    return Result<json>::success(json{{"transfer_id", "tx-" + std::to_string(++*counter)},
                                      {"amount", args.value("amount", 0.0)}});
  });
  backends_.register_backend("update_account", [](const json& args) {
    return Result<json>::success(json{{"updated", args.value("field", "")}});
  });
}

void Engine::start_session(const json& spec, TimestampMs now_ms) {
  if (session_ && session_->active) handle_session_end({now_ms, "session_end", {}, 0});
  if (session_) {
    for (const auto& t : report_.transcript) finished_turns_.push_back(t);
    report_.transcript.clear();
  }
  session_ = std::make_unique<Session>();
  session_->session_id = spec.value("session_id", "s1");
  session_->user_id = spec.value("user_id", "");
  session_->personal_surface_id = spec.value("personal_surface_id", "");
  session_->active = true;
  session_->fusion = FusionState(session_->session_id);
  session_handles_[session_->session_id] = {session_->session_id, true};
  for (const auto& sid : spec.value("surface_ids", json::array())) {
    std::string id = sid.get<std::string>();
    session_->surfaces.push_back(id);
    // Surface attachment is itself a device-layer observation.
    auto sig = synthesize_signal(
        "device_session",
        json{{"surface_id", id},
             {"active", true},
             {"kind", surface_by_id(id) ? to_string(surface_by_id(id)->kind) : "kiosk_screen"}},
        Layer::Device, "session-manager", 1.0, now_ms);
    session_->device_signal_ids.push_back(sig.signal_id);
    apply_signal(sig);
  }
  refresh_active_surfaces(now_ms);
}

void Engine::refresh_consent_scopes(Session& s, TimestampMs now) {
  json scopes = json::array();
  for (const auto& p : consents_.active_purposes(s.user_id, now)) scopes.push_back(p);
  // The consent grant is itself an enterprise-layer observation.
  auto sig = synthesize_signal("consent_scope", json{{"purposes", scopes}}, Layer::Enterprise,
                               "consent-service", 1.0, now);
  s.fusion.set_direct(VariableName::ConsentScopes, scopes, 1.0, now, {sig.signal_id});
}

void Engine::refresh_active_surfaces(TimestampMs now) {
  if (!session_) return;
  Session& s = *session_;
  if (s.device_signal_ids.empty()) return;
  json ids = json::array();
  std::vector<std::string> sorted = s.surfaces;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& id : sorted) ids.push_back(id);
  s.fusion.set_direct(VariableName::ActiveSurfaces, ids, 1.0, now, s.device_signal_ids);
}

std::vector<Surface> Engine::attached_surfaces(const Session& s) const {
  std::vector<Surface> out;
  for (const auto& id : s.surfaces) {
    auto it = surfaces_.find(id);
    if (it != surfaces_.end()) out.push_back(it->second);
  }
  return out;
}

const Surface* Engine::surface_by_id(const std::string& id) const {
  auto it = surfaces_.find(id);
  return it == surfaces_.end() ? nullptr : &it->second;
}

ContextSignal Engine::synthesize_signal(const std::string& channel, json payload, Layer layer,
                                        const std::string& source, double quality,
                                        TimestampMs now) {
  ContextSignal s;
  s.signal_id = next_id("sig-" + channel);
  s.layer = layer;
  s.channel = channel;
  s.timestamp_ms = now;
  s.payload.type = channel;
  s.payload.fields = std::move(payload);
  s.quality = quality;
  s.provenance.source_id = source;
  s.provenance.sensitivity =
      layer == Layer::Enterprise ? Sensitivity::Internal : Sensitivity::Internal;
  s.provenance.acquisition =
      layer == Layer::Enterprise ? Acquisition::Consented : Acquisition::Ambient;
  return s;
}

void Engine::apply_signal(const ContextSignal& signal) {
  if (!session_) return;
  auto outcome = session_->fusion.apply_signal(signal, config_.fusion);
  (void)outcome;
}

void Engine::process_event(const ScenarioEvent& ev) {
  json log_entry{{"at_ms", ev.at_ms}, {"kind", ev.kind}, {"outcome", "processed"}};
  if (ev.kind == "sensor")
    handle_sensor(ev);
  else if (ev.kind == "utterance")
    handle_utterance(ev);
  else if (ev.kind == "auth")
    handle_auth(ev);
  else if (ev.kind == "consent")
    handle_consent(ev);
  else if (ev.kind == "confirmation")
    handle_confirmation(ev);
  else if (ev.kind == "step_up")
    handle_step_up(ev);
  else if (ev.kind == "dual_control")
    handle_dual_control(ev);
  else if (ev.kind == "verification")
    handle_verification(ev);
  else if (ev.kind == "risk_score")
    handle_risk_score(ev);
  else if (ev.kind == "staff_status")
    handle_staff_status(ev);
  else if (ev.kind == "session_start")
    handle_session_start(ev);
  else if (ev.kind == "session_end")
    handle_session_end(ev);
  else if (ev.kind == "token_redeem")
    handle_token_redeem(ev);
  else if (ev.kind == "memory_request")
    handle_memory_request(ev);
  else if (ev.kind == "tick") {
    // clock advance only
  } else {
    log_entry["outcome"] = "rejected: unknown kind";
  }
  report_.event_log.push_back(std::move(log_entry));

  evaluate_initiative(ev.at_ms);
  snapshot_state(ev.at_ms);
}

void Engine::handle_sensor(const ScenarioEvent& ev) {
  json raw = ev.fields;
  if (!raw.contains("timestamp_ms")) raw["timestamp_ms"] = ev.at_ms;
  std::string source = raw.value("source_id", "");
  auto reg = config_.sources.find(source);
  auto reject = [&](const std::string& reason) {
    report_.rejections.push_back(json{{"at_ms", ev.at_ms},
                                      {"source_id", source},
                                      {"reason", reason}});
  };
  if (source.empty()) return reject("missing field: source_id");
  if (reg == config_.sources.end()) return reject("unregistered source");

  auto normalized = normalize_event(raw, reg->second, ingest_seq_++);
  if (!normalized.ok()) return reject(normalized.error);
  auto aligned = align_timestamp(*normalized, reg->second);
  if (!aligned.ok()) return reject(aligned.error);
  if (!seen_signal_ids_.insert(aligned->signal_id).second)
    return reject("duplicate signal_id: " + aligned->signal_id);
  if (dedup_.is_duplicate(*aligned, reg->second.dedup_window_ms))
    return reject("duplicate within dedup window");

  if (!session_) return;
  // device_session signals also attach/detach surfaces
  if (aligned->channel == "device_session") {
    std::string sid = aligned->payload.fields.value("surface_id", "");
    bool active = aligned->payload.fields.value("active", false);
    auto& list = session_->surfaces;
    auto it = std::find(list.begin(), list.end(), sid);
    if (active && it == list.end() && surfaces_.count(sid)) list.push_back(sid);
    if (!active && it != list.end()) list.erase(it);
    session_->device_signal_ids.push_back(aligned->signal_id);
  }
  apply_signal(*aligned);
  if (aligned->channel == "device_session") refresh_active_surfaces(ev.at_ms);
}

void Engine::handle_utterance(const ScenarioEvent& ev) {
  if (!session_ || !session_->active) return;
  run_utterance(*session_, ev.fields.value("text", ""), true, ev.at_ms);
}

void Engine::run_utterance(Session& s, const std::string& text, bool append_user_turn,
                           TimestampMs now) {
  if (append_user_turn) {
    append_turn(s, TurnRole::User, text, now);
    s.tail.last_user_utterance_ms = now;
    s.last_utterance = text;
  }

  Intent intent = detect_intent(text, config_.intents);
  if (intent.name != "unknown") s.latest_intent = intent.name;

  PromptInputs in;
  in.persona = config_.persona;
  in.constraints = config_.constraints;
  in.user_id = s.user_id;
  in.auth_level = s.auth_level;
  in.user_message = text;
  in.intent = intent;
  for (const auto& turn : s.transcript.turns)
    if (turn.role != TurnRole::SystemEvent)
      in.history.emplace_back(to_string(turn.role), turn.text);
  in.candidates = collect_candidates(s, intent, now);

  PromptDocument prompt = compose_prompt(in, config_.policy, consents_, now);
  for (const auto& [item_id, decision] : prompt.authorization_trace) {
    report_.policy_log.push_back(json{{"at_ms", now},
                                      {"item_id", item_id},
                                      {"decision", to_json(decision)}});
    if (decision.allowed()) {
      if (std::find(s.allowed_item_refs.begin(), s.allowed_item_refs.end(), item_id) ==
          s.allowed_item_refs.end())
        s.allowed_item_refs.push_back(item_id);
    } else if (decision.outcome == Outcome::Require &&
               decision.required_step == RequiredStep::Consent) {
      for (const auto& candidate : in.candidates)
        if (candidate.item.item_id == item_id) s.pending_consent_purpose = candidate.purpose;
      if (std::find(s.open_questions.begin(), s.open_questions.end(),
                    "awaiting consent") == s.open_questions.end())
        s.open_questions.push_back("awaiting consent");
    }
  }

  GeneratorOutput out = generate_reply(prompt, mock_generate);
  std::vector<std::string> disclosures = narrate_disclosure(prompt);
  std::string reply;
  for (const auto& d : disclosures) reply += d + " ";
  reply += out.text;

  // Deliver policy-allowed enterprise content items attached to this turn.
  for (const auto& candidate : in.candidates) {
    auto trace = prompt.authorization_trace.find(candidate.item.item_id);
    if (trace == prompt.authorization_trace.end() || !trace->second.allowed()) continue;
    if (!candidate.item.pii && candidate.item.source != "account_activity") continue;
    deliver_item(s, candidate.item, now, candidate.purpose);
  }

  deliver_reply(s, reply, now);
  append_turn(s, TurnRole::Assistant, reply, now);
  s.tail.last_system_prompt_ms = now;

  for (auto proposed : out.calls) {
    resolve_call_args(s, proposed);
    propose_call(s, proposed, now);
  }

  if (intent.name == "request_human") {
    std::string topic = "general";
    auto appt = stubs_.fixtures().value("appointments", json::object());
    if (!s.user_id.empty() && appt.contains(s.user_id))
      topic = appt.at(s.user_id).value("topic", "general");
    initiate_handoff(s, topic, now);
  }
  if (intent.name == "memory_query" && !s.user_id.empty()) {
    auto listing = user_memory_request(s.user_id, json{{"action", "list"}}, memory_, now);
    std::string text_list;
    for (const auto& e : listing.listed) text_list += " [" + e.entry_id + "] " + e.body + ";";
    audit_memory_request(s, "memory_list", now);
    system_note(s, "memory on file:" + (text_list.empty() ? " none" : text_list), now);
  }
}

json Engine::audit_memory_request(Session& s, const std::string& op, TimestampMs now) {
  json body{{"call_id", next_id("mem-req")},
            {"op_name", op},
            {"status", "executed"},
            {"context_digest", snapshot_hash(s.fusion.state())},
            {"consent_state", consents_.active_purposes(s.user_id, now)}};
  audit_.append(body, now);
  return body;
}

std::vector<CandidateItem> Engine::collect_candidates(Session& s, const Intent& intent,
                                                      TimestampMs now) {
  std::vector<CandidateItem> out;
  SituationalState decayed = s.fusion.decayed(now, config_.fusion);

  if (const StateEntry* q = decayed.find(VariableName::QueueLength); q && !q->unknown()) {
    CandidateItem c;
    c.item.item_id = "ctx-queue";
    c.item.body = "queue length " + std::to_string(q->value.value("count", int64_t{0}));
    c.item.pii = false;
    c.item.sensitivity = Sensitivity::Public;
    c.item.source = "queue_system";
    c.purpose = "session-context";
    c.section = "situational_context";
    c.data = json{{"count", q->value.value("count", int64_t{0})},
                  {"wait_minutes", int64_t(q->value.value("wait_s", 0.0) / 60.0)}};
    out.push_back(std::move(c));
  }
  if (const StateEntry* occ = decayed.find(VariableName::Occupancy); occ && !occ->unknown()) {
    CandidateItem c;
    c.item.item_id = "ctx-occupancy";
    c.item.body = "lobby occupancy " + canonical_dump(occ->value);
    c.item.pii = false;
    c.item.sensitivity = Sensitivity::Public;
    c.item.source = "situational";
    c.purpose = "session-context";
    c.section = "situational_context";
    c.data = json{{"count", occ->value}};
    out.push_back(std::move(c));
  }
  if (const StateEntry* appt = decayed.find(VariableName::Appointment);
      appt && !appt->unknown()) {
    CandidateItem c;
    c.item.item_id = "appt-" + s.user_id;
    std::string purpose_text = appt->value.value("purpose", "");
    c.item.body = "appointment: " + purpose_text;
    c.item.pii = false;
    c.item.sensitivity = Sensitivity::Internal;
    c.item.source = "appointment_record";
    c.purpose = "appointment-lookup";
    c.section = "situational_context";
    c.data = json{{"name", s.display_name},
                  {"purpose", purpose_text},
                  {"at_ms", appt->value.value("at_ms", int64_t{0})},
                  {"wait_minutes", minutes_away(appt->value.value("at_ms", int64_t{0}), now)},
                  {"fragment", "you're here for a " + purpose_text}};
    out.push_back(std::move(c));
  }

  // Intent-driven enterprise fetches go through the gate before any stub
  // call; the candidate is described first and only filled if allowed.
  if ((intent.name == "loan_inquiry") && !s.user_id.empty()) {
    CandidateItem c;
    c.item.item_id = "crm-loan-" + s.user_id;
    c.item.pii = true;
    c.item.sensitivity = Sensitivity::Restricted;
    c.item.source = "account_activity";
    c.purpose = "transaction-history";
    c.section = "situational_context";
    AccessRequest req{s.user_id, c.item.sensitivity, c.purpose, s.auth_level,
                      evaluate_consent(s.user_id, c.purpose, consents_, now), now};
    if (evaluate_access(req, config_.policy).allowed()) {
      auto crm = stubs_.query("crm", s.user_id);
      if (crm.found && crm.record.contains("loan")) {
        c.item.body = crm.record.at("loan").value("body", "");
        c.data["fragment"] = crm.record.at("loan").value("fragment", "you hold a loan with us");
      }
    }
    out.push_back(std::move(c));
  }

  if (!s.user_id.empty()) {
    auto hits = memory_.retrieve(s.user_id, memory_terms(s.last_utterance), 3, now);
    for (const auto& hit : hits) {
      CandidateItem c;
      c.item.item_id = "mem-" + hit.entry_id;
      c.item.body = hit.body;
      c.item.pii = false;
      c.item.sensitivity = Sensitivity::Internal;
      c.item.source = "prior_conversation";
      c.purpose = *hit.purpose_tags.begin();
      c.section = "memory";
      c.data = json{{"fragment", hit.body}};
      out.push_back(std::move(c));
    }
  }
  return out;
}

void Engine::resolve_call_args(Session& s, ProposedCall& call) {
  // The engine validates required parameters against the current context:
  // missing arguments are filled from enterprise fixtures where a
  // deterministic mapping exists.
  auto crm = stubs_.fixtures().value("crm", json::object());
  const json profile = (!s.user_id.empty() && crm.contains(s.user_id))
                           ? crm.at(s.user_id)
                           : json::object();
  if (call.op_name == "block_card" && !call.args.contains("card_id")) {
    auto cards = profile.value("cards", json::array());
    if (!cards.empty()) call.args["card_id"] = cards.at(0).value("card_id", "");
  }
  if (call.op_name == "schedule_appointment" && !call.args.contains("purpose")) {
    auto appts = stubs_.fixtures().value("appointments", json::object());
    call.args["purpose"] = (!s.user_id.empty() && appts.contains(s.user_id))
                               ? appts.at(s.user_id).value("purpose", "follow-up")
                               : "follow-up";
  }
}

void Engine::propose_call(Session& s, const ProposedCall& proposed, TimestampMs now) {
  auto validated = validate_call(proposed.op_name, proposed.args, config_.registry,
                                 s.session_id, now, next_id("call"));
  if (!validated.ok()) {
    system_note(s, "action rejected: " + validated.error, now);
    report_.calls.push_back(json{{"op_name", proposed.op_name},
                                 {"status", "rejected"},
                                 {"reason", validated.error}});
    return;
  }
  s.calls.push_back(*validated);
  ActionCall& call = s.calls.back();
  if (call.status == CallStatus::PendingConfirmation)
    system_note(s,
                "awaiting confirmation for " + call.op_name + " (" + call.call_id + ")",
                now);
  attempt_execution(call, now);
}

ActionCall* Engine::find_call(CallStatus status) {
  if (!session_) return nullptr;
  for (auto it = session_->calls.rbegin(); it != session_->calls.rend(); ++it)
    if (it->status == status) return &*it;
  return nullptr;
}

void Engine::attempt_execution(ActionCall& call, TimestampMs now) {
  if (!session_) return;
  Session& s = *session_;
  std::optional<RiskAssessment> risk;
  auto risk_it = risk_by_op_.find(call.op_name);
  if (risk_it != risk_by_op_.end()) {
    risk = risk_it->second;
    risk->call_id = call.call_id;
  }

  ExecutionContext ctx;
  SituationalState state = s.fusion.state();
  ctx.state = &state;
  ctx.consent_purposes = consents_.active_purposes(s.user_id, now);
  ctx.intervention = config_.intervention;
  ctx.now_ms = now;

  CallStatus before = call.status;
  ExecutionOutcome outcome = execute_call(call, risk, config_.registry, backends_, audit_, ctx);
  call = outcome.call;

  if (outcome.intervention) {
    report_.intervention_log.push_back(json{{"at_ms", now},
                                            {"call_id", call.call_id},
                                            {"op_name", call.op_name},
                                            {"outcome", to_string(*outcome.intervention)},
                                            {"score", risk ? risk->score : 0.0}});
    if (*outcome.intervention != InterventionOutcome::Proceed) {
      append_turn(s, TurnRole::Assistant, outcome.note, now);
      s.tail.last_system_prompt_ms = now;
      if (*outcome.intervention == InterventionOutcome::Suspend)
        s.open_questions.push_back("suspended: " + call.op_name);
      return;
    }
  }

  switch (call.status) {
    case CallStatus::Executed:
      system_note(s, call.op_name + " executed (" + call.call_id + ")", now);
      break;
    case CallStatus::PendingStepUp:
      if (before != CallStatus::PendingStepUp)
        system_note(s, "step-up verification required for " + call.op_name, now);
      break;
    case CallStatus::PendingDualControl:
      if (before != CallStatus::PendingDualControl)
        system_note(s, "dual control approval required for " + call.op_name, now);
      break;
    case CallStatus::Rejected:
      system_note(s, call.op_name + " rejected: " + call.reason, now);
      break;
    default:
      break;
  }
}

void Engine::deliver_item(Session& s, const ContentItem& item, TimestampMs now,
                          const std::string& purpose) {
  auto available = attached_surfaces(s);
  auto routed = select_surface(item, available);
  auto record = [&](const ContentItem& delivered, const std::string& surface_id) {
    report_.deliveries.push_back(json{{"at_ms", now},
                                      {"item_id", delivered.item_id},
                                      {"surface_id", surface_id},
                                      {"body", delivered.body},
                                      {"pii", delivered.pii}});
  };
  const Surface* primary = s.surfaces.empty() ? nullptr : surface_by_id(s.surfaces.front());

  if (!routed.ok()) {
    // No private surface: fall back to a deep-link handoff via a continuity
    // token; the item is held until the token is redeemed.
    if (s.personal_surface_id.empty()) {
      system_note(s, "cannot deliver " + item.item_id + ": " + routed.error, now);
      return;
    }
    auto token = mint_continuity_token(session_handles_[s.session_id], s.personal_surface_id,
                                       {purpose}, config_.token_ttl_ms, run_secret_, now);
    if (!token.ok()) {
      system_note(s, "token mint failed: " + token.error, now);
      return;
    }
    last_token_wire_ = token_wire(*token);
    s.held_items.push_back(item);
    report_.token_events.push_back(json{{"at_ms", now},
                                        {"action", "mint"},
                                        {"token_id", token->token_id},
                                        {"issued_for", token->issued_for},
                                        {"outcome", "ok"}});
    if (primary) record(redact_for_surface(item, *primary), primary->surface_id);
    system_note(s,
                "secure deep link issued — open it on your personal device to view the "
                "details",
                now);
    return;
  }

  record(redact_for_surface(item, *routed), routed->surface_id);
  if (item.pii && primary && primary->surface_id != routed->surface_id &&
      primary->privacy == SurfacePrivacy::Shared)
    record(redact_for_surface(item, *primary), primary->surface_id);
}

void Engine::deliver_reply(Session& s, const std::string& text, TimestampMs now) {
  if (s.surfaces.empty()) return;
  const Surface* primary = surface_by_id(s.surfaces.front());
  if (!primary) return;
  ContentItem reply;
  reply.item_id = next_id("reply");
  reply.body = text;
  reply.pii = false;
  reply.sensitivity = Sensitivity::Internal;
  reply.source = "reply";
  ContentItem delivered = redact_for_surface(reply, *primary);
  report_.deliveries.push_back(json{{"at_ms", now},
                                    {"item_id", delivered.item_id},
                                    {"surface_id", primary->surface_id},
                                    {"body", delivered.body},
                                    {"pii", delivered.pii}});
}

void Engine::append_turn(Session& s, TurnRole role, const std::string& text, TimestampMs now) {
  DialogueTurn turn;
  turn.turn_id = s.transcript.turns.empty() ? 1 : s.transcript.turns.back().turn_id + 1;
  turn.role = role;
  turn.text = text;
  turn.timestamp_ms = now;
  SituationalState decayed = s.fusion.decayed(now, config_.fusion);
  for (const auto& [name, entry] : decayed.variables)
    if (!entry.unknown()) turn.active_context.push_back(to_string(name));
  s.transcript.append_turn(turn);
  json j = to_json(turn);
  j["session_id"] = s.session_id;
  report_.transcript.push_back(std::move(j));
}

void Engine::system_note(Session& s, const std::string& text, TimestampMs now) {
  append_turn(s, TurnRole::SystemEvent, text, now);
}

void Engine::handle_auth(const ScenarioEvent& ev) {
  if (!session_) return;
  Session& s = *session_;
  s.user_id = ev.fields.value("user_id", s.user_id);
  auto level = auth_level_from_string(ev.fields.value("level", "authenticated"));
  s.auth_level = level.ok() ? *level : AuthLevel::Authenticated;
  std::string method = ev.fields.value("method", "qr_scan");
  system_note(s, "customer authenticated via " + method + " (" + s.user_id + ")", ev.at_ms);
  refresh_consent_scopes(s, ev.at_ms);

  // Authentication keys the session-data lookup against the branch platform,
  // gated like any other access.
  AccessRequest req{s.user_id, Sensitivity::Internal, "appointment-lookup", s.auth_level,
                    evaluate_consent(s.user_id, "appointment-lookup", consents_, ev.at_ms),
                    ev.at_ms};
  PolicyDecision decision = evaluate_access(req, config_.policy);
  report_.policy_log.push_back(json{{"at_ms", ev.at_ms},
                                    {"item_id", "appointment-lookup:" + s.user_id},
                                    {"decision", to_json(decision)}});
  if (!decision.allowed()) return;

  auto appt = stubs_.query("appointments", s.user_id);
  if (!appt.found) return;
  s.display_name = appt.record.value("name", "");
  auto signal = synthesize_signal("appointment",
                                  json{{"user_id", s.user_id},
                                       {"purpose", appt.record.value("purpose", "")},
                                       {"at_ms", appt.record.value("at_ms", int64_t{0})}},
                                  Layer::Enterprise, "branch-mgmt", 1.0, ev.at_ms);
  apply_signal(signal);
}

void Engine::handle_consent(const ScenarioEvent& ev) {
  if (!session_) return;
  Session& s = *session_;
  ConsentRecord record;
  record.user_id = ev.fields.value("user_id", s.user_id);
  record.purpose = ev.fields.value("purpose", "");
  record.granted_at_ms = ev.at_ms;
  record.expires_at_ms = ev.fields.contains("expires_at_ms")
                             ? ev.fields.at("expires_at_ms").get<int64_t>()
                             : ev.at_ms + ev.fields.value("ttl_ms", int64_t{3600000});
  record.channel = ev.fields.value("channel", "kiosk");
  if (record.purpose.empty() || record.expires_at_ms <= record.granted_at_ms) return;
  consents_.grant(record);
  refresh_consent_scopes(s, ev.at_ms);
  system_note(s, "consent recorded for " + record.purpose, ev.at_ms);

  if (s.pending_consent_purpose && *s.pending_consent_purpose == record.purpose &&
      !s.last_utterance.empty()) {
    s.pending_consent_purpose.reset();
    s.open_questions.erase(
        std::remove(s.open_questions.begin(), s.open_questions.end(), "awaiting consent"),
        s.open_questions.end());
    run_utterance(s, s.last_utterance, false, ev.at_ms);
  }
}

void Engine::handle_confirmation(const ScenarioEvent& ev) {
  ActionCall* call = find_call(CallStatus::PendingConfirmation);
  if (!call) return;
  call->confirmation = Confirmation{ev.at_ms, ev.fields.value("channel", "kiosk")};
  attempt_execution(*call, ev.at_ms);
}

void Engine::handle_step_up(const ScenarioEvent& ev) {
  ActionCall* call = find_call(CallStatus::PendingStepUp);
  if (!call) return;
  call->step_up = StepUpVerification{ev.at_ms, ev.fields.value("method", "biometric")};
  attempt_execution(*call, ev.at_ms);
}

void Engine::handle_dual_control(const ScenarioEvent& ev) {
  ActionCall* call = find_call(CallStatus::PendingDualControl);
  if (!call) return;
  call->dual_approval = DualApproval{ev.at_ms, ev.fields.value("staff_id", "")};
  attempt_execution(*call, ev.at_ms);
}

void Engine::handle_verification(const ScenarioEvent& ev) {
  ActionCall* call = find_call(CallStatus::Suspended);
  if (!call) call = find_call(CallStatus::Ready);
  if (!call) return;
  call->verified = IntentVerification{ev.at_ms, ev.fields.value("channel", "kiosk")};
  if (session_)
    system_note(*session_, "intent verified for " + call->op_name, ev.at_ms);
  attempt_execution(*call, ev.at_ms);
}

void Engine::handle_risk_score(const ScenarioEvent& ev) {
  RiskAssessment a;
  a.score = ev.fields.value("score", 0.0);
  for (const auto& ind : ev.fields.value("indicators", json::array()))
    a.indicators.push_back(ind.get<std::string>());
  std::string op = ev.fields.value("op_name", "");
  if (!op.empty()) risk_by_op_[op] = std::move(a);
}

void Engine::handle_staff_status(const ScenarioEvent& ev) {
  std::string staff_id = ev.fields.value("staff_id", "");
  if (staff_id.empty()) return;
  StaffMember& member = roster_[staff_id];
  member.staff_id = staff_id;
  if (ev.fields.contains("availability")) {
    auto avail = availability_from_string(ev.fields.at("availability").get<std::string>());
    if (avail.ok()) member.availability = *avail;
  }
  if (ev.fields.contains("workload")) member.workload = ev.fields.at("workload").get<int>();
  if (ev.fields.contains("specializations")) {
    member.specializations.clear();
    for (const auto& sp : ev.fields.at("specializations"))
      member.specializations.insert(sp.get<std::string>());
  }

  // An advisor tied to this session's appointment becoming free starts the
  // structured handoff.
  if (!session_ || !session_->active) return;
  if (member.availability != StaffMember::Availability::Free) return;
  auto appts = stubs_.fixtures().value("appointments", json::object());
  if (session_->user_id.empty() || !appts.contains(session_->user_id)) return;
  const json& appt = appts.at(session_->user_id);
  if (appt.value("advisor_id", "") != staff_id) return;
  initiate_handoff(*session_, appt.value("topic", "general"), ev.at_ms);
}

void Engine::initiate_handoff(Session& s, const std::string& topic, TimestampMs now) {
  std::vector<StaffMember> roster;
  for (const auto& [id, member] : roster_) roster.push_back(member);
  auto staff = route_handoff(topic, roster);
  if (!staff) {
    system_note(s, "no staff available for " + topic + "; handoff queued", now);
    report_.handoffs.push_back(
        json{{"at_ms", now}, {"staff_id", nullptr}, {"topic", topic}, {"queued", true}});
    return;
  }

  HandoffInputs in;
  in.session_id = s.session_id;
  in.turn_count = s.transcript.turns.size();
  in.latest_intent = s.latest_intent;
  for (const auto& entry : audit_.entries())
    if (entry.value("status", "") == "executed")
      in.executed_steps.push_back(entry.value("op_name", "") + " at " +
                                  std::to_string(entry.value("timestamp_ms", int64_t{0})) +
                                  "ms");
  in.allowed_item_refs = s.allowed_item_refs;
  in.open_questions = s.open_questions;
  auto summary = build_handoff_summary(in);
  if (!summary.ok()) {
    system_note(s, "handoff summary unavailable: " + summary.error, now);
    return;
  }

  // Deliver the summary to the routed staff member's terminal.
  std::string terminal;
  auto staff_fixture = stubs_.fixtures().value("staff", json::array());
  for (const auto& fixture : staff_fixture)
    if (fixture.value("staff_id", "") == staff->staff_id)
      terminal = fixture.value("terminal", "");
  ContentItem item;
  item.item_id = "handoff-" + s.session_id;
  item.body = canonical_dump(to_json(*summary));
  item.pii = false;
  item.sensitivity = Sensitivity::Internal;
  item.source = "handoff";
  if (!terminal.empty() && surfaces_.count(terminal)) {
    report_.deliveries.push_back(json{{"at_ms", now},
                                      {"item_id", item.item_id},
                                      {"surface_id", terminal},
                                      {"body", item.body},
                                      {"pii", false}});
  }
  roster_[staff->staff_id].workload++;
  report_.handoffs.push_back(json{{"at_ms", now},
                                  {"staff_id", staff->staff_id},
                                  {"topic", topic},
                                  {"summary", to_json(*summary)}});
  system_note(s,
              "context summary transmitted to " + staff->staff_id +
                  "; the customer will not need to repeat anything",
              now);
}

void Engine::handle_session_start(const ScenarioEvent& ev) {
  start_session(ev.fields, ev.at_ms);
}

void Engine::handle_session_end(const ScenarioEvent& ev) {
  if (!session_ || !session_->active) return;
  Session& s = *session_;
  std::set<std::string> consented;
  for (const auto& p : consents_.active_purposes(s.user_id, ev.at_ms)) consented.insert(p);
  auto entries = distill_session(s.transcript, s.user_id, s.latest_intent, consented,
                                 config_.retention, ev.at_ms);
  for (auto& e : entries) memory_.add(e);
  system_note(s,
              "session ended; " + std::to_string(entries.size()) +
                  " memory entr" + (entries.size() == 1 ? "y" : "ies") + " persisted",
              ev.at_ms);
  for (const auto& call : s.calls) report_.calls.push_back(to_json(call));
  s.calls.clear();
  s.active = false;
  session_handles_[s.session_id].active = false;
}

void Engine::handle_token_redeem(const ScenarioEvent& ev) {
  if (!session_) return;
  Session& s = *session_;
  std::string wire = ev.fields.value("token", "last");
  if (wire == "last") {
    if (!last_token_wire_) {
      report_.token_events.push_back(
          json{{"at_ms", ev.at_ms}, {"action", "redeem"}, {"outcome", "no token minted"}});
      return;
    }
    wire = *last_token_wire_;
  }
  auto redeemed = redeem_continuity_token(wire, run_secret_, ev.at_ms, session_handles_,
                                          tokens_);
  if (!redeemed.ok()) {
    report_.token_events.push_back(
        json{{"at_ms", ev.at_ms}, {"action", "redeem"}, {"outcome", redeemed.error}});
    system_note(s, "token redemption rejected: " + redeemed.error, ev.at_ms);
    return;
  }
  const ContinuityToken& token = redeemed->token;
  report_.token_events.push_back(json{{"at_ms", ev.at_ms},
                                      {"action", "redeem"},
                                      {"token_id", token.token_id},
                                      {"outcome", "ok"}});
  // Attach the target surface and hand over held items.
  if (surfaces_.count(token.issued_for) &&
      std::find(s.surfaces.begin(), s.surfaces.end(), token.issued_for) == s.surfaces.end()) {
    s.surfaces.push_back(token.issued_for);
    auto sig = synthesize_signal("device_session",
                                 json{{"surface_id", token.issued_for},
                                      {"active", true},
                                      {"kind", to_string(surfaces_[token.issued_for].kind)}},
                                 Layer::Device, "session-manager", 1.0, ev.at_ms);
    s.device_signal_ids.push_back(sig.signal_id);
    apply_signal(sig);
    refresh_active_surfaces(ev.at_ms);
  }
  system_note(s, "continuity token redeemed; session continues on " + token.issued_for,
              ev.at_ms);
  auto held = std::move(s.held_items);
  s.held_items.clear();
  for (const auto& item : held) deliver_item(s, item, ev.at_ms, "transaction-history");
}

void Engine::handle_memory_request(const ScenarioEvent& ev) {
  if (!session_) return;
  Session& s = *session_;
  std::string user = ev.fields.value("user_id", s.user_id);
  auto outcome = user_memory_request(user, ev.fields, memory_, ev.at_ms);
  audit_memory_request(s, "memory_" + outcome.action, ev.at_ms);
  if (!outcome.ok()) {
    system_note(s, "memory request failed: " + outcome.error, ev.at_ms);
    return;
  }
  if (outcome.action == "list") {
    std::string text;
    for (const auto& e : outcome.listed) text += " [" + e.entry_id + "] " + e.body + ";";
    system_note(s, "memory on file:" + (text.empty() ? " none" : text), ev.at_ms);
  } else {
    system_note(s, "memory " + outcome.action + " completed", ev.at_ms);
  }
}

InitiativeLevel Engine::initiative_cap(const Session& s, TimestampMs now) const {
  InitiativeLevel cap = InitiativeLevel::Act;
  if (s.user_id.empty() ||
      !evaluate_consent(s.user_id, config_.proactive_consent_purpose, consents_, now))
    cap = InitiativeLevel::Hint;
  // Long-term preference can lower the ceiling further.
  for (const auto& e : memory_.entries()) {
    if (e.user_id != s.user_id || !e.live(now)) continue;
    if (e.kind != MemoryEntry::Kind::Preference) continue;
    auto pos = e.body.find("initiative ceiling: ");
    if (pos == std::string::npos) continue;
    std::string level = e.body.substr(pos + 20);
    if (level == "silent") cap = std::min(cap, InitiativeLevel::Silent);
    if (level == "hint") cap = std::min(cap, InitiativeLevel::Hint);
    if (level == "suggest") cap = std::min(cap, InitiativeLevel::Suggest);
    if (level == "prefill") cap = std::min(cap, InitiativeLevel::Prefill);
  }
  return cap;
}

void Engine::evaluate_initiative(TimestampMs now) {
  if (!session_ || !session_->active) return;
  Session& s = *session_;
  SituationalState decayed = s.fusion.decayed(now, config_.fusion);
  auto fired = triggers_.evaluate(decayed, s.tail, now, config_.triggers);
  if (fired.empty()) return;
  InitiativeLevel cap = initiative_cap(s, now);
  const StateEntry* activity = decayed.find(VariableName::ActivityState);

  for (const auto& trigger : fired) {
    InitiativeDecision decision = decide_level(trigger, config_.triggers.thresholds, cap, now);
    decision = apply_suppression(decision, activity, config_.triggers.suppression_floor);
    json log = to_json(decision);
    log["kind"] = to_string(trigger.kind);
    log["confidence"] = trigger.confidence;
    report_.initiative_log.push_back(std::move(log));
    if (decision.level == InitiativeLevel::Silent) continue;

    json params = trigger.params;
    if (params.value("event", "") == "appointment_soon") {
      const StateEntry* appt = decayed.find(VariableName::Appointment);
      if (appt && !appt->unknown())
        params["remaining_minutes"] = minutes_away(appt->value.value("at_ms", int64_t{0}), now);
    }
    std::string text = proactive_utterance(trigger.kind, params, decision.level);
    if (text.empty()) continue;
    deliver_reply(s, text, now);
    append_turn(s, TurnRole::Assistant, text, now);
    s.tail.last_system_prompt_ms = now;

    if (decision.level == InitiativeLevel::Prefill) {
      ProposedCall prefill{"prefill_form", json{{"form", "service_request"}}};
      propose_call(s, prefill, now);
    } else if (decision.level == InitiativeLevel::Act &&
               trigger.params.value("event", "") == "queue_position") {
      ProposedCall act{"queue_status", json::object()};
      propose_call(s, act, now);
    }
  }
}

void Engine::snapshot_state(TimestampMs now) {
  if (!session_) return;
  SituationalState decayed = session_->fusion.decayed(now, config_.fusion);
  json vars = json::object();
  for (const auto& [name, entry] : decayed.variables) vars[to_string(name)] = to_json(entry);
  report_.state_timeline.push_back(json{
      {"at_ms", now}, {"digest", snapshot_hash(decayed)}, {"variables", std::move(vars)}});
}

RunReport Engine::finish() {
  RunReport report = std::move(report_);
  std::vector<json> transcript = std::move(finished_turns_);
  for (auto& t : report.transcript) transcript.push_back(std::move(t));
  report.transcript = std::move(transcript);
  if (session_) {
    for (const auto& call : session_->calls) report.calls.push_back(to_json(call));
    for (const auto& u : session_->fusion.unused_reports())
      report.rejections.push_back(json{{"reason", u}});
  }
  for (const auto& ref : stubs_.call_log()) report.stub_calls.push_back(json(ref));
  for (const auto& op : backends_.call_log()) report.stub_calls.push_back(json("op:" + op));
  report.audit_jsonl = audit_.to_jsonl();
  return report;
}

Result<RunReport> run_scenario(const Scenario& scenario, const EngineConfig& base_config,
                               std::optional<uint64_t> seed_override) {
  EngineConfig config = base_config;
  auto applied = apply_config_overrides(config, scenario.config);
  if (!applied.ok()) return Result<RunReport>::failure(applied.error);

  if (!scenario.registrations.empty()) {
    try {
      for (const auto& reg_json : scenario.registrations) {
        auto reg = registration_from_json(reg_json);
        if (!reg.ok()) return Result<RunReport>::failure(reg.error);
        config.sources[reg->source_id] = *reg;
      }
    } catch (const std::exception& e) {
      return Result<RunReport>::failure(e.what());
    }
  }

  auto started = std::chrono::steady_clock::now();
  Engine engine(config, seed_override.value_or(scenario.seed), scenario.fixtures);
  for (const auto& surface_json : scenario.surfaces) {
    auto surface = surface_from_json(surface_json);
    if (!surface.ok()) return Result<RunReport>::failure(surface.error);
    engine.add_surface(*surface);
  }
  engine.seed_consents(scenario.consents);
  engine.seed_memory(scenario.fixtures.value("memory_seed", json::array()));
  engine.start_session(scenario.session, 0);

  for (const auto& event : scenario.events) engine.process_event(event);

  RunReport report = engine.finish();
  report.scenario_id = scenario.scenario_id;
  report.assertion_results = check_assertions(report, scenario);
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  return Result<RunReport>::success(std::move(report));
}

}  // namespace ambient
