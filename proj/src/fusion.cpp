#include "ambient/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace ambient {

double FusionConfig::weight(VariableName v, const std::string& source) const {
  auto it = weights.find({v, source});
  return it == weights.end() ? default_weight : it->second;
}

double FusionConfig::tau(VariableName v) const {
  auto it = decay_tau_ms.find(v);
  return it == decay_tau_ms.end() ? default_tau_ms : it->second;
}

int64_t FusionConfig::ttl(VariableName v) const {
  auto it = ttl_ms.find(v);
  return it == ttl_ms.end() ? default_ttl_ms : it->second;
}

Result<FusionConfig> fusion_config_from_json(const json& j) {
  using R = Result<FusionConfig>;
  FusionConfig c;
  if (!j.is_object()) return R::failure("fusion config: not an object");
  try {
    c.disagreement_penalty = j.value("disagreement_penalty", 0.5);
    c.default_weight = j.value("default_weight", 1.0);
    c.default_tau_ms = j.value("default_tau_ms", 10000.0);
    c.default_ttl_ms = j.value("default_ttl_ms", int64_t{30000});
    c.activity_window_ms = j.value("activity_window_ms", int64_t{3000});
    c.staff_served_count = j.value("staff_served_count", int64_t{0});
    c.per_customer_service_s = j.value("per_customer_service_s", 180.0);
    if (j.contains("weights")) {
      for (const auto& [var_name, sources] : j.at("weights").items()) {
        auto var = variable_from_string(var_name);
        if (!var.ok()) return R::failure(var.error);
        for (const auto& [source, w] : sources.items())
          c.weights[{*var, source}] = w.get<double>();
      }
    }
    if (j.contains("decay_tau_ms")) {
      for (const auto& [var_name, tau] : j.at("decay_tau_ms").items()) {
        auto var = variable_from_string(var_name);
        if (!var.ok()) return R::failure(var.error);
        c.decay_tau_ms[*var] = tau.get<double>();
      }
    }
    if (j.contains("ttl_ms")) {
      for (const auto& [var_name, ttl] : j.at("ttl_ms").items()) {
        auto var = variable_from_string(var_name);
        if (!var.ok()) return R::failure(var.error);
        c.ttl_ms[*var] = ttl.get<int64_t>();
      }
    }
  } catch (const json::exception& e) {
    return R::failure(std::string("fusion config: ") + e.what());
  }
  for (const auto& [key, w] : c.weights)
    if (!(w >= 0.0 && w <= 1.0)) return R::failure("fusion config: weight out of range");
  for (const auto& [v, tau] : c.decay_tau_ms)
    if (tau <= 0.0) return R::failure("fusion config: tau must be > 0");
  for (const auto& [v, ttl] : c.ttl_ms)
    if (ttl <= 0) return R::failure("fusion config: ttl must be > 0");
  if (!(c.disagreement_penalty >= 0.0 && c.disagreement_penalty <= 1.0))
    return R::failure("fusion config: disagreement_penalty out of range");
  return R::success(std::move(c));
}

std::optional<VariableName> channel_variable(const std::string& channel) {
  static const std::map<std::string, VariableName> map = {
      {"presence", VariableName::UserPresent},
      {"ble_localization", VariableName::UserPosition},
      {"uwb_localization", VariableName::UserPosition},
      {"camera_localization", VariableName::UserPosition},
      {"occupancy", VariableName::Occupancy},
      {"noise_db", VariableName::NoiseLevel},
      {"appointment", VariableName::Appointment},
      {"advisor_status", VariableName::AdvisorAvailability},
      {"workflow", VariableName::WorkflowStage},
  };
  auto it = map.find(channel);
  if (it == map.end()) return std::nullopt;
  return it->second;
}

namespace {

json candidate_value(const ContextSignal& s) {
  const json& p = s.payload.fields;
  if (s.channel == "presence") return p.at("present");
  if (s.channel == "ble_localization" || s.channel == "uwb_localization" ||
      s.channel == "camera_localization")
    return p.at("zone");
  if (s.channel == "occupancy") return p.at("count");
  if (s.channel == "noise_db") return p.at("noise_db");
  if (s.channel == "appointment") return p;
  if (s.channel == "advisor_status") return p;
  if (s.channel == "workflow") return p.at("stage");
  return p;
}

bool is_activity_channel(const std::string& channel) {
  return channel == "gaze" || channel == "device_session" || channel == "diarization" ||
         channel == "presence";
}

}  // namespace

StateEntry resolve_conflict(const std::vector<Candidate>& candidates,
                            const FusionConfig& config) {
  StateEntry entry;
  if (candidates.empty()) {
    entry.value = nullptr;
    entry.confidence = 0.0;
    return entry;
  }
  const Candidate* winner = &candidates.front();
  for (const auto& c : candidates) {
    if (c.score > winner->score ||
        (c.score == winner->score && c.timestamp_ms > winner->timestamp_ms) ||
        (c.score == winner->score && c.timestamp_ms == winner->timestamp_ms &&
         c.source_id < winner->source_id))
      winner = &c;
  }
  double best_disagreeing = 0.0;
  bool disagreement = false;
  for (const auto& c : candidates) {
    if (c.value != winner->value) {
      disagreement = true;
      best_disagreeing = std::max(best_disagreeing, c.score);
    }
  }
  double agreement = 1.0;
  if (disagreement && winner->score > 0.0)
    agreement = 1.0 - config.disagreement_penalty * (best_disagreeing / winner->score);

  entry.value = winner->value;
  entry.confidence = winner->score * agreement;
  entry.updated_at_ms = winner->timestamp_ms;
  for (const auto& c : candidates) entry.contributors.push_back(c.signal_id);
  std::sort(entry.contributors.begin(), entry.contributors.end());
  return entry;
}

double decayed_confidence(const StateEntry& e, VariableName v, TimestampMs now_ms,
                          const FusionConfig& config) {
  int64_t elapsed = now_ms - e.updated_at_ms;
  if (elapsed <= 0) return e.confidence;
  if (elapsed > config.ttl(v)) return 0.0;
  return e.confidence * std::exp(-double(elapsed) / config.tau(v));
}

SituationalState decay_confidence(const SituationalState& state, TimestampMs now_ms,
                                  const FusionConfig& config) {
  SituationalState out = state;
  for (auto& [v, entry] : out.variables) {
    int64_t elapsed = now_ms - entry.updated_at_ms;
    if (elapsed <= 0) continue;
    if (elapsed > config.ttl(v)) {
      entry.value = nullptr;
      entry.confidence = 0.0;
    } else {
      entry.confidence *= std::exp(-double(elapsed) / config.tau(v));
    }
  }
  return out;
}

StateEntry derive_queue_state(const std::optional<Candidate>& ticket,
                              const std::optional<StateEntry>& occupancy,
                              const FusionConfig& config, TimestampMs now_ms) {
  StateEntry entry;
  entry.value = nullptr;
  entry.confidence = 0.0;
  entry.updated_at_ms = now_ms;
  if (!ticket && !occupancy) return entry;

  int64_t count = 0;
  if (ticket) {
    count = ticket->value.at("count").get<int64_t>();
    entry.contributors.push_back(ticket->signal_id);
  } else {
    int64_t occ = occupancy->value.is_number_integer() ? occupancy->value.get<int64_t>() : 0;
    count = std::max<int64_t>(occ - config.staff_served_count, 0);
  }
  double confidence = ticket ? ticket->score : 1.0;
  if (occupancy) {
    confidence = std::min(confidence, occupancy->confidence);
    for (const auto& id : occupancy->contributors) entry.contributors.push_back(id);
  }
  std::sort(entry.contributors.begin(), entry.contributors.end());
  entry.value = json{{"count", count},
                     {"wait_s", double(count) * config.per_customer_service_s}};
  entry.confidence = confidence;
  return entry;
}

StateEntry derive_activity_state(const std::vector<ActivityObservation>& window,
                                 TimestampMs now_ms) {
  StateEntry entry;
  entry.value = nullptr;
  entry.confidence = 0.0;
  entry.updated_at_ms = now_ms;

  const ActivityObservation* gaze = nullptr;
  const ActivityObservation* phone = nullptr;
  const ActivityObservation* other_speaker = nullptr;
  const ActivityObservation* presence = nullptr;
  // Later observations win within each rule.
  for (const auto& o : window) {
    if (o.channel == "gaze" && o.payload.value("target", "") == "kiosk") gaze = &o;
    if (o.channel == "device_session" && o.payload.value("active", false) &&
        o.payload.value("kind", "") == "personal_device")
      phone = &o;
    if (o.channel == "diarization" && o.payload.value("speakers", 0) >= 2) other_speaker = &o;
    if (o.channel == "presence" && o.payload.value("present", false)) presence = &o;
  }

  auto set = [&entry](const char* value, const ActivityObservation* o) {
    entry.value = value;
    entry.confidence = o->score;
    entry.updated_at_ms = o->timestamp_ms;
    entry.contributors = {o->signal_id};
  };
  if (gaze)
    set("engaged", gaze);
  else if (phone)
    set("on_phone", phone);
  else if (other_speaker)
    set("talking_to_other", other_speaker);
  else if (presence)
    set("waiting", presence);
  return entry;
}

FusionState::ApplyOutcome FusionState::apply_signal(const ContextSignal& signal,
                                                    const FusionConfig& config) {
  ApplyOutcome outcome;
  TimestampMs now = signal.timestamp_ms;
  double score = config.weight(VariableName::UserPresent, signal.provenance.source_id);

  if (is_activity_channel(signal.channel)) {
    activity_window_.push_back({signal.channel, signal.payload.fields,
                                config.weight(VariableName::ActivityState,
                                              signal.provenance.source_id) *
                                    signal.quality,
                                signal.timestamp_ms, signal.signal_id});
    while (!activity_window_.empty() &&
           now - activity_window_.front().timestamp_ms > config.activity_window_ms)
      activity_window_.pop_front();
    refresh_activity(config, now);
    outcome.used = true;
    outcome.updated.push_back(VariableName::ActivityState);
  }

  if (signal.channel == "queue") {
    Candidate c;
    c.value = signal.payload.fields;
    c.score = config.weight(VariableName::QueueLength, signal.provenance.source_id) *
              signal.quality;
    c.timestamp_ms = signal.timestamp_ms;
    c.source_id = signal.provenance.source_id;
    c.signal_id = signal.signal_id;
    queue_ticket_ = std::move(c);
    refresh_queue(config, now);
    outcome.used = true;
    outcome.updated.push_back(VariableName::QueueLength);
    return outcome;
  }

  auto var = channel_variable(signal.channel);
  if (!var) {
    if (!outcome.used)
      unused_.push_back("unused signal " + signal.signal_id + ": unmapped channel '" +
                        signal.channel + "'");
    return outcome;
  }

  score = config.weight(*var, signal.provenance.source_id) * signal.quality;
  Candidate c;
  c.value = candidate_value(signal);
  c.score = score;
  c.timestamp_ms = signal.timestamp_ms;
  c.source_id = signal.provenance.source_id;
  c.signal_id = signal.signal_id;
  candidates_[*var].push_back(std::move(c));
  prune(*var, now, config);
  state_.variables[*var] = resolve_conflict(candidates_[*var], config);
  outcome.used = true;
  outcome.updated.push_back(*var);

  if (*var == VariableName::Occupancy) {
    refresh_queue(config, now);
    outcome.updated.push_back(VariableName::QueueLength);
  }
  return outcome;
}

void FusionState::set_direct(VariableName v, json value, double confidence, TimestampMs now_ms,
                             std::vector<std::string> contributors) {
  StateEntry e;
  e.value = std::move(value);
  e.confidence = e.value.is_null() ? 0.0 : confidence;
  e.updated_at_ms = now_ms;
  e.contributors = std::move(contributors);
  state_.variables[v] = std::move(e);
}

void FusionState::prune(VariableName v, TimestampMs now_ms, const FusionConfig& config) {
  int64_t ttl = config.ttl(v);
  auto& list = candidates_[v];
  list.erase(std::remove_if(list.begin(), list.end(),
                            [&](const Candidate& c) { return now_ms - c.timestamp_ms > ttl; }),
             list.end());
}

void FusionState::refresh_queue(const FusionConfig& config, TimestampMs now_ms) {
  std::optional<StateEntry> occ;
  if (const StateEntry* e = state_.find(VariableName::Occupancy); e && !e->unknown())
    occ = *e;
  std::optional<Candidate> ticket = queue_ticket_;
  if (ticket && now_ms - ticket->timestamp_ms > config.ttl(VariableName::QueueLength))
    ticket = std::nullopt;
  StateEntry q = derive_queue_state(ticket, occ, config, now_ms);
  if (!q.unknown()) state_.variables[VariableName::QueueLength] = std::move(q);
}

void FusionState::refresh_activity(const FusionConfig& config, TimestampMs now_ms) {
  std::vector<ActivityObservation> window;
  for (const auto& o : activity_window_)
    if (now_ms - o.timestamp_ms <= config.activity_window_ms) window.push_back(o);
  state_.variables[VariableName::ActivityState] = derive_activity_state(window, now_ms);
}

}  // namespace ambient
