#include "ambient/initiative.hpp"

#include <algorithm>

namespace ambient {

std::string to_string(TriggerKind v) {
  switch (v) {
    case TriggerKind::TemporalSilence:
      return "temporal_silence";
    case TriggerKind::BehavioralCue:
      return "behavioral_cue";
    case TriggerKind::SituationalEvent:
      return "situational_event";
  }
  return "?";
}

Result<TriggerKind> trigger_kind_from_string(const std::string& s) {
  if (s == "temporal_silence") return Result<TriggerKind>::success(TriggerKind::TemporalSilence);
  if (s == "behavioral_cue") return Result<TriggerKind>::success(TriggerKind::BehavioralCue);
  if (s == "situational_event")
    return Result<TriggerKind>::success(TriggerKind::SituationalEvent);
  return Result<TriggerKind>::failure("unknown trigger kind: " + s);
}

std::string to_string(InitiativeLevel v) {
  switch (v) {
    case InitiativeLevel::Silent:
      return "silent";
    case InitiativeLevel::Hint:
      return "hint";
    case InitiativeLevel::Suggest:
      return "suggest";
    case InitiativeLevel::Prefill:
      return "prefill";
    case InitiativeLevel::Act:
      return "act";
  }
  return "?";
}

json to_json(const InitiativeDecision& d) {
  return json{{"trigger_id", d.trigger_id},
              {"level", to_string(d.level)},
              {"rationale", d.rationale},
              {"decided_at_ms", d.decided_at_ms}};
}

Result<LevelThresholds> validate_thresholds(const LevelThresholds& t) {
  auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_range(t.hint) || !in_range(t.suggest) || !in_range(t.prefill) || !in_range(t.act))
    return Result<LevelThresholds>::failure("initiative thresholds must be in [0,1]");
  if (!(t.hint <= t.suggest && t.suggest <= t.prefill && t.prefill <= t.act))
    return Result<LevelThresholds>::failure(
        "initiative thresholds must be non-decreasing (hint <= suggest <= prefill <= act)");
  return Result<LevelThresholds>::success(t);
}

Result<TriggerConfig> trigger_config_from_json(const json& j) {
  using R = Result<TriggerConfig>;
  TriggerConfig c;
  if (!j.is_object()) return R::failure("trigger config: not an object");
  try {
    if (j.contains("thresholds")) {
      const json& t = j.at("thresholds");
      c.thresholds.hint = t.value("hint", 0.4);
      c.thresholds.suggest = t.value("suggest", 0.65);
      c.thresholds.prefill = t.value("prefill", 0.8);
      c.thresholds.act = t.value("act", 0.95);
    }
    c.refractory_ms = j.value("refractory_ms", int64_t{10000});
    c.suppression_floor = j.value("suppression_floor", 0.5);
    for (const auto& spec : j.value("triggers", json::array())) {
      TriggerSpec s;
      s.trigger_id = spec.at("trigger_id").get<std::string>();
      auto kind = trigger_kind_from_string(spec.at("kind").get<std::string>());
      if (!kind.ok()) return R::failure(kind.error);
      s.kind = *kind;
      s.params = spec.value("params", json::object());
      c.specs.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    return R::failure(std::string("trigger config: ") + e.what());
  }
  auto ok = validate_thresholds(c.thresholds);
  if (!ok.ok()) return R::failure(ok.error);
  return R::success(std::move(c));
}

std::vector<Trigger> TriggerEngine::evaluate(const SituationalState& state,
                                             const DialogueTail& tail, TimestampMs now_ms,
                                             const TriggerConfig& config) {
  std::vector<Trigger> fired;
  for (const auto& spec : config.specs) {
    auto last = last_fired_.find(spec.trigger_id);
    if (last != last_fired_.end() && now_ms - last->second < config.refractory_ms) continue;

    Trigger t;
    t.trigger_id = spec.trigger_id;
    t.kind = spec.kind;
    t.params = spec.params;
    bool fires = false;

    switch (spec.kind) {
      case TriggerKind::TemporalSilence: {
        int64_t threshold = spec.params.value("silence_threshold_ms", int64_t{2000});
        if (!tail.last_system_prompt_ms) break;
        bool user_spoke_since = tail.last_user_utterance_ms &&
                                *tail.last_user_utterance_ms > *tail.last_system_prompt_ms;
        if (user_spoke_since) break;
        if (now_ms - *tail.last_system_prompt_ms <= threshold) break;
        const StateEntry* presence = state.find(VariableName::UserPresent);
        if (!presence || presence->unknown() || presence->confidence <= 0.0) break;
        if (presence->value != json(true)) break;
        t.confidence = presence->confidence;
        t.evidence = presence->contributors;
        fires = true;
        break;
      }
      case TriggerKind::BehavioralCue: {
        std::string cue = spec.params.value("cue", "waiting");
        const StateEntry* activity = state.find(VariableName::ActivityState);
        if (!activity || activity->unknown() || activity->confidence <= 0.0) break;
        if (activity->value != json(cue)) break;
        t.confidence = activity->confidence;
        t.evidence = activity->contributors;
        fires = true;
        break;
      }
      case TriggerKind::SituationalEvent: {
        std::string event = spec.params.value("event", "");
        if (event == "appointment_soon") {
          int64_t horizon = spec.params.value("horizon_ms", int64_t{300000});
          const StateEntry* appt = state.find(VariableName::Appointment);
          if (!appt || appt->unknown() || appt->confidence <= 0.0) break;
          int64_t at = appt->value.value("at_ms", int64_t{0});
          int64_t remaining = at - now_ms;
          if (remaining < 0 || remaining > horizon) break;
          t.confidence = appt->confidence;
          t.evidence = appt->contributors;
          fires = true;
        } else if (event == "queue_position") {
          int64_t max_pos = spec.params.value("max_position", int64_t{2});
          const StateEntry* queue = state.find(VariableName::QueueLength);
          if (!queue || queue->unknown() || queue->confidence <= 0.0) break;
          int64_t pos = queue->value.value("count", int64_t{1 << 30});
          if (pos > max_pos) break;
          t.confidence = queue->confidence;
          t.evidence = queue->contributors;
          fires = true;
        }
        break;
      }
    }

    if (fires && !t.evidence.empty()) {
      last_fired_[spec.trigger_id] = now_ms;
      fired.push_back(std::move(t));
    }
  }
  return fired;
}

InitiativeDecision decide_level(const Trigger& trigger, const LevelThresholds& thresholds,
                                InitiativeLevel cap, TimestampMs now_ms) {
  InitiativeLevel raw = InitiativeLevel::Silent;
  if (trigger.confidence >= thresholds.act)
    raw = InitiativeLevel::Act;
  else if (trigger.confidence >= thresholds.prefill)
    raw = InitiativeLevel::Prefill;
  else if (trigger.confidence >= thresholds.suggest)
    raw = InitiativeLevel::Suggest;
  else if (trigger.confidence >= thresholds.hint)
    raw = InitiativeLevel::Hint;

  InitiativeDecision d;
  d.trigger_id = trigger.trigger_id;
  d.level = std::min(raw, cap);
  d.decided_at_ms = now_ms;
  if (d.level != InitiativeLevel::Silent) {
    d.rationale = to_string(trigger.kind) + "; evidence:";
    for (const auto& id : trigger.evidence) d.rationale += " " + id;
    if (d.level != raw) d.rationale += "; capped at " + to_string(cap);
  }
  return d;
}

InitiativeDecision apply_suppression(const InitiativeDecision& decision,
                                     const StateEntry* activity, double floor) {
  if (decision.level == InitiativeLevel::Silent || !activity || activity->unknown())
    return decision;
  bool occupied = activity->value == json("on_phone") || activity->value == json("talking_to_other");
  if (!occupied || activity->confidence < floor) return decision;
  InitiativeDecision out = decision;
  out.level = InitiativeLevel::Silent;
  out.rationale = "suppressed: user occupied (" + activity->value.get<std::string>() + ")";
  return out;
}

}  // namespace ambient
