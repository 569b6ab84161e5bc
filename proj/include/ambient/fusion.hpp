#pragma once
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ambient/context.hpp"

namespace ambient {

struct FusionConfig {
  // (variable, source_id) -> weight; sources absent from the table use
  // default_weight.
  std::map<std::pair<VariableName, std::string>, double> weights;
  std::map<VariableName, double> decay_tau_ms;
  std::map<VariableName, int64_t> ttl_ms;
  double disagreement_penalty = 0.5;
  double default_weight = 1.0;
  double default_tau_ms = 10000.0;
  int64_t default_ttl_ms = 30000;
  int64_t activity_window_ms = 3000;
  // queue fallback: max(occupancy - staff_served_count, 0) customers waiting
  int64_t staff_served_count = 0;
  double per_customer_service_s = 180.0;

  double weight(VariableName v, const std::string& source) const;
  double tau(VariableName v) const;
  int64_t ttl(VariableName v) const;
};

Result<FusionConfig> fusion_config_from_json(const json& j);

struct Candidate {
  json value;
  double score = 0.0;  // weight(source) x quality
  TimestampMs timestamp_ms = 0;
  std::string source_id;
  std::string signal_id;
};

// Channels that feed weighted per-variable candidates.
std::optional<VariableName> channel_variable(const std::string& channel);

// Winner-takes-value resolution with agreement-scaled confidence:
//   winner  = max score (ties: most recent, then lexicographic source_id)
//   agree   = 1 if all candidate values equal the winner's,
//             else 1 - penalty * (best disagreeing score / winner score)
//   conf    = winner.score * agree
// No candidates -> unknown with confidence 0.
StateEntry resolve_conflict(const std::vector<Candidate>& candidates,
                            const FusionConfig& config);

// Recomputable exponential decay view: conf' = conf * exp(-(now-updated)/tau);
// entries older than ttl read as unknown. The stored state is untouched, so
// decaying twice at the same instant gives the same answer.
SituationalState decay_confidence(const SituationalState& state, TimestampMs now_ms,
                                  const FusionConfig& config);
double decayed_confidence(const StateEntry& e, VariableName v, TimestampMs now_ms,
                          const FusionConfig& config);

// queue_length from ticket data when present, else from occupancy minus the
// configured staff+served count; wait estimate = count x per-customer time.
StateEntry derive_queue_state(const std::optional<Candidate>& ticket,
                              const std::optional<StateEntry>& occupancy,
                              const FusionConfig& config, TimestampMs now_ms);

// Deterministic rule table over the recent signal window:
//   gaze at kiosk > personal device session active > other speaker heard >
//   presence (waiting) > unknown.
struct ActivityObservation {
  std::string channel;
  json payload;
  double score = 0.0;
  TimestampMs timestamp_ms = 0;
  std::string signal_id;
};
StateEntry derive_activity_state(const std::vector<ActivityObservation>& window,
                                 TimestampMs now_ms);

// Per-session fusion state: candidate sets per variable plus the rolling
// inputs the composite derivations need.
class FusionState {
 public:
  explicit FusionState(std::string session_id) { state_.session_id = std::move(session_id); }

  struct ApplyOutcome {
    bool used = false;
    std::vector<VariableName> updated;
  };

  // Routes one signal: records candidates, re-resolves affected variables,
  // refreshes derived variables. Unmapped channels are reported, not fatal.
  ApplyOutcome apply_signal(const ContextSignal& signal, const FusionConfig& config);

  // Engine-maintained variables (consent scopes, active surfaces).
  void set_direct(VariableName v, json value, double confidence, TimestampMs now_ms,
                  std::vector<std::string> contributors);

  const SituationalState& state() const { return state_; }
  SituationalState decayed(TimestampMs now_ms, const FusionConfig& config) const {
    return decay_confidence(state_, now_ms, config);
  }
  const std::vector<std::string>& unused_reports() const { return unused_; }
  std::optional<Candidate> latest_queue_ticket() const { return queue_ticket_; }

 private:
  void prune(VariableName v, TimestampMs now_ms, const FusionConfig& config);
  void refresh_queue(const FusionConfig& config, TimestampMs now_ms);
  void refresh_activity(const FusionConfig& config, TimestampMs now_ms);

  SituationalState state_;
  std::map<VariableName, std::vector<Candidate>> candidates_;
  std::deque<ActivityObservation> activity_window_;
  std::optional<Candidate> queue_ticket_;
  std::vector<std::string> unused_;
};

}  // namespace ambient
