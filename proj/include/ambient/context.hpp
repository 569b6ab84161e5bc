#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ambient {

using json = nlohmann::json;

// All timestamps are integer milliseconds relative to the scenario epoch.
// Wall-clock never enters the engine, so replays are deterministic.
using TimestampMs = int64_t;

template <typename T>
struct Result {
  std::optional<T> value;
  std::string error;

  bool ok() const { return value.has_value(); }
  const T& operator*() const { return *value; }
  T& operator*() { return *value; }
  const T* operator->() const { return &*value; }

  static Result success(T v) { return Result{std::move(v), {}}; }
  static Result failure(std::string reason) { return Result{std::nullopt, std::move(reason)}; }
};

enum class Layer { Physical, Device, Enterprise };

// Ordered: public < internal < confidential < restricted.
enum class Sensitivity { Public = 0, Internal = 1, Confidential = 2, Restricted = 3 };

enum class Acquisition { Ambient, Consented, Derived };

struct Provenance {
  std::string source_id;
  Sensitivity sensitivity = Sensitivity::Internal;
  Acquisition acquisition = Acquisition::Ambient;
  std::optional<std::string> note;  // derived signals list parent signal_ids here
};

struct Payload {
  std::string type;  // must match the carrying signal's channel
  json fields = json::object();
};

// One normalized, provenance-tagged observation from any context layer.
struct ContextSignal {
  std::string signal_id;
  Layer layer = Layer::Physical;
  std::string channel;
  TimestampMs timestamp_ms = 0;
  Payload payload;
  double quality = 1.0;
  Provenance provenance;
};

enum class SurfaceKind {
  SharedDisplay,
  KioskScreen,
  PersonalDevice,
  AudioPublic,
  AudioPrivate,
  StaffTerminal
};

enum class SurfacePrivacy { Shared, Personal, Authenticated };

enum class Capability { Text, Visual, Audio };

struct Surface {
  std::string surface_id;
  SurfaceKind kind = SurfaceKind::SharedDisplay;
  SurfacePrivacy privacy = SurfacePrivacy::Shared;
  std::set<Capability> capabilities;
};

enum class VariableName {
  UserPresent,
  UserPosition,
  ActivityState,
  QueueLength,
  Occupancy,
  NoiseLevel,
  Appointment,
  WorkflowStage,
  AdvisorAvailability,
  ConsentScopes,
  ActiveSurfaces
};

// One inferred situational variable. value is a JSON variant per variable;
// JSON null means unknown (and forces confidence 0).
struct StateEntry {
  json value;  // null == unknown
  double confidence = 0.0;
  TimestampMs updated_at_ms = 0;
  std::vector<std::string> contributors;

  bool unknown() const { return value.is_null(); }
};

struct SituationalState {
  std::string session_id;
  std::map<VariableName, StateEntry> variables;

  const StateEntry* find(VariableName v) const {
    auto it = variables.find(v);
    return it == variables.end() ? nullptr : &it->second;
  }
};

struct ConsentRecord {
  std::string user_id;
  std::string purpose;
  TimestampMs granted_at_ms = 0;
  TimestampMs expires_at_ms = 0;
  std::string channel;
};

// ---- enum <-> string tables (wire names) ----

std::string to_string(Layer v);
std::string to_string(Sensitivity v);
std::string to_string(Acquisition v);
std::string to_string(SurfaceKind v);
std::string to_string(SurfacePrivacy v);
std::string to_string(Capability v);
std::string to_string(VariableName v);

Result<Layer> layer_from_string(const std::string& s);
Result<Sensitivity> sensitivity_from_string(const std::string& s);
Result<Acquisition> acquisition_from_string(const std::string& s);
Result<SurfaceKind> surface_kind_from_string(const std::string& s);
Result<SurfacePrivacy> surface_privacy_from_string(const std::string& s);
Result<Capability> capability_from_string(const std::string& s);
Result<VariableName> variable_from_string(const std::string& s);

// ---- serialization ----
// Objects serialize with lexicographically sorted keys (nlohmann's default
// object storage), so dump() of these is the canonical form used for hashing.

json to_json(const Provenance& p);
json to_json(const ContextSignal& s);
json to_json(const Surface& s);
json to_json(const StateEntry& e);
json to_json(const SituationalState& s);
json to_json(const ConsentRecord& c);

Result<ContextSignal> signal_from_json(const json& j);
Result<Surface> surface_from_json(const json& j);
Result<ConsentRecord> consent_from_json(const json& j);
Result<SituationalState> state_from_json(const json& j);

std::string canonical_dump(const json& j);

struct ValidationResult {
  bool ok = true;
  std::vector<std::string> violations;
};

// Structural validation of a single signal: ranges, payload/channel tag
// agreement, per-channel required fields, provenance rules. Total function.
ValidationResult validate_signal(const ContextSignal& s);

// Known channel -> expected payload fields. Channels outside this table are
// accepted as long as the payload tag matches; fusion reports them unused.
bool channel_is_known(const std::string& channel);

// Surface invariants (shared_display/audio_public are shared, etc.).
ValidationResult validate_surface(const Surface& s);

// Deterministic digest of a situational state over its canonical
// serialization; insertion-order independent by construction.
std::string snapshot_hash(const SituationalState& state);

}  // namespace ambient
