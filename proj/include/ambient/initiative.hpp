#pragma once
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ambient/fusion.hpp"

namespace ambient {

enum class TriggerKind { TemporalSilence, BehavioralCue, SituationalEvent };

std::string to_string(TriggerKind v);
Result<TriggerKind> trigger_kind_from_string(const std::string& s);

struct Trigger {
  std::string trigger_id;
  TriggerKind kind = TriggerKind::TemporalSilence;
  json params;
  std::vector<std::string> evidence;
  double confidence = 0.0;
};

// silent < hint < suggest < prefill < act
enum class InitiativeLevel { Silent = 0, Hint = 1, Suggest = 2, Prefill = 3, Act = 4 };

std::string to_string(InitiativeLevel v);

struct InitiativeDecision {
  std::string trigger_id;
  InitiativeLevel level = InitiativeLevel::Silent;
  std::string rationale;
  TimestampMs decided_at_ms = 0;
};

json to_json(const InitiativeDecision& d);

struct LevelThresholds {
  double hint = 0.4;
  double suggest = 0.65;
  double prefill = 0.8;
  double act = 0.95;
};

// Threshold ordering is a load-time configuration error, never a
// decision-time one.
Result<LevelThresholds> validate_thresholds(const LevelThresholds& t);

struct TriggerSpec {
  std::string trigger_id;
  TriggerKind kind = TriggerKind::TemporalSilence;
  json params;  // silence_threshold_ms | cue | event + horizon_ms/max_position
};

struct TriggerConfig {
  std::vector<TriggerSpec> specs;
  LevelThresholds thresholds;
  int64_t refractory_ms = 10000;
  double suppression_floor = 0.5;
};

Result<TriggerConfig> trigger_config_from_json(const json& j);

struct DialogueTail {
  std::optional<TimestampMs> last_system_prompt_ms;
  std::optional<TimestampMs> last_user_utterance_ms;
};

// Stateful only for refractory clocks; evaluation itself is a pure function
// of (decayed state, dialogue tail, now).
class TriggerEngine {
 public:
  std::vector<Trigger> evaluate(const SituationalState& decayed_state, const DialogueTail& tail,
                                TimestampMs now_ms, const TriggerConfig& config);
  void reset() { last_fired_.clear(); }

 private:
  std::map<std::string, TimestampMs> last_fired_;
};

// raw level = highest level whose threshold <= confidence; final = min(raw,
// cap). The cap folds in consent scope and any per-user ceiling.
InitiativeDecision decide_level(const Trigger& trigger, const LevelThresholds& thresholds,
                                InitiativeLevel cap, TimestampMs now_ms);

// Drop to silent while the user is occupied (on_phone / talking_to_other at
// or above the confidence floor).
InitiativeDecision apply_suppression(const InitiativeDecision& decision,
                                     const StateEntry* activity, double floor);

}  // namespace ambient
