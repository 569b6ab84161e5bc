#include "ambient/context.hpp"

#include <algorithm>

#include "ambient/digest.hpp"

namespace ambient {

namespace {

template <typename E>
struct NamePair {
  E value;
  const char* name;
};

constexpr NamePair<Layer> kLayers[] = {
    {Layer::Physical, "physical"}, {Layer::Device, "device"}, {Layer::Enterprise, "enterprise"}};
constexpr NamePair<Sensitivity> kSensitivities[] = {{Sensitivity::Public, "public"},
                                                    {Sensitivity::Internal, "internal"},
                                                    {Sensitivity::Confidential, "confidential"},
                                                    {Sensitivity::Restricted, "restricted"}};
constexpr NamePair<Acquisition> kAcquisitions[] = {{Acquisition::Ambient, "ambient"},
                                                   {Acquisition::Consented, "consented"},
                                                   {Acquisition::Derived, "derived"}};
constexpr NamePair<SurfaceKind> kSurfaceKinds[] = {{SurfaceKind::SharedDisplay, "shared_display"},
                                                   {SurfaceKind::KioskScreen, "kiosk_screen"},
                                                   {SurfaceKind::PersonalDevice, "personal_device"},
                                                   {SurfaceKind::AudioPublic, "audio_public"},
                                                   {SurfaceKind::AudioPrivate, "audio_private"},
                                                   {SurfaceKind::StaffTerminal, "staff_terminal"}};
constexpr NamePair<SurfacePrivacy> kPrivacies[] = {{SurfacePrivacy::Shared, "shared"},
                                                   {SurfacePrivacy::Personal, "personal"},
                                                   {SurfacePrivacy::Authenticated, "authenticated"}};
constexpr NamePair<Capability> kCapabilities[] = {
    {Capability::Text, "text"}, {Capability::Visual, "visual"}, {Capability::Audio, "audio"}};
constexpr NamePair<VariableName> kVariables[] = {
    {VariableName::UserPresent, "user_present"},
    {VariableName::UserPosition, "user_position"},
    {VariableName::ActivityState, "activity_state"},
    {VariableName::QueueLength, "queue_length"},
    {VariableName::Occupancy, "occupancy"},
    {VariableName::NoiseLevel, "noise_level"},
    {VariableName::Appointment, "appointment"},
    {VariableName::WorkflowStage, "workflow_stage"},
    {VariableName::AdvisorAvailability, "advisor_availability"},
    {VariableName::ConsentScopes, "consent_scopes"},
    {VariableName::ActiveSurfaces, "active_surfaces"}};

template <typename E, size_t N>
std::string name_of(const NamePair<E> (&table)[N], E v) {
  for (const auto& p : table)
    if (p.value == v) return p.name;
  return "?";
}

template <typename E, size_t N>
Result<E> value_of(const NamePair<E> (&table)[N], const std::string& s, const char* what) {
  for (const auto& p : table)
    if (s == p.name) return Result<E>::success(p.value);
  return Result<E>::failure(std::string("unknown ") + what + ": " + s);
}

enum class FieldType { Bool, Int, Number, String };

struct FieldSpec {
  const char* name;
  FieldType type;
  bool required;
};

// Required/typed payload fields per known channel.
const std::map<std::string, std::vector<FieldSpec>>& channel_schemas() {
  static const std::map<std::string, std::vector<FieldSpec>> schemas = {
      {"vad", {{"active", FieldType::Bool, true}}},
      {"presence", {{"present", FieldType::Bool, true}, {"zone", FieldType::String, false}}},
      {"ble_localization",
       {{"zone", FieldType::String, true}, {"distance_m", FieldType::Number, false}}},
      {"uwb_localization",
       {{"zone", FieldType::String, true}, {"distance_m", FieldType::Number, false}}},
      {"camera_localization", {{"zone", FieldType::String, true}}},
      {"occupancy", {{"count", FieldType::Int, true}}},
      {"noise_db", {{"noise_db", FieldType::Number, true}}},
      {"gaze", {{"target", FieldType::String, true}}},
      {"diarization", {{"speakers", FieldType::Int, true}}},
      {"device_session",
       {{"surface_id", FieldType::String, true},
        {"active", FieldType::Bool, true},
        {"kind", FieldType::String, false}}},
      {"appointment",
       {{"user_id", FieldType::String, true},
        {"purpose", FieldType::String, true},
        {"at_ms", FieldType::Int, true}}},
      {"queue",
       {{"count", FieldType::Int, true},
        {"now_serving", FieldType::Int, false},
        {"user_position", FieldType::Int, false}}},
      {"advisor_status",
       {{"staff_id", FieldType::String, true}, {"status", FieldType::String, true}}},
      {"risk_score", {{"score", FieldType::Number, true}, {"op_name", FieldType::String, false}}},
      {"transcript", {{"text", FieldType::String, true}}},
      {"workflow", {{"stage", FieldType::String, true}}},
  };
  return schemas;
}

bool field_type_matches(const json& v, FieldType t) {
  switch (t) {
    case FieldType::Bool:
      return v.is_boolean();
    case FieldType::Int:
      return v.is_number_integer();
    case FieldType::Number:
      return v.is_number();
    case FieldType::String:
      return v.is_string();
  }
  return false;
}

}  // namespace

std::string to_string(Layer v) { return name_of(kLayers, v); }
std::string to_string(Sensitivity v) { return name_of(kSensitivities, v); }
std::string to_string(Acquisition v) { return name_of(kAcquisitions, v); }
std::string to_string(SurfaceKind v) { return name_of(kSurfaceKinds, v); }
std::string to_string(SurfacePrivacy v) { return name_of(kPrivacies, v); }
std::string to_string(Capability v) { return name_of(kCapabilities, v); }
std::string to_string(VariableName v) { return name_of(kVariables, v); }

Result<Layer> layer_from_string(const std::string& s) { return value_of(kLayers, s, "layer"); }
Result<Sensitivity> sensitivity_from_string(const std::string& s) {
  return value_of(kSensitivities, s, "sensitivity");
}
Result<Acquisition> acquisition_from_string(const std::string& s) {
  return value_of(kAcquisitions, s, "acquisition");
}
Result<SurfaceKind> surface_kind_from_string(const std::string& s) {
  return value_of(kSurfaceKinds, s, "surface kind");
}
Result<SurfacePrivacy> surface_privacy_from_string(const std::string& s) {
  return value_of(kPrivacies, s, "surface privacy");
}
Result<Capability> capability_from_string(const std::string& s) {
  return value_of(kCapabilities, s, "capability");
}
Result<VariableName> variable_from_string(const std::string& s) {
  return value_of(kVariables, s, "variable");
}

json to_json(const Provenance& p) {
  json j{{"source_id", p.source_id},
         {"sensitivity", to_string(p.sensitivity)},
         {"acquisition", to_string(p.acquisition)}};
  if (p.note) j["note"] = *p.note;
  return j;
}

json to_json(const ContextSignal& s) {
  return json{{"signal_id", s.signal_id},   {"layer", to_string(s.layer)},
              {"channel", s.channel},       {"timestamp_ms", s.timestamp_ms},
              {"payload", s.payload.fields}, {"payload_type", s.payload.type},
              {"quality", s.quality},       {"provenance", to_json(s.provenance)}};
}

json to_json(const Surface& s) {
  json caps = json::array();
  for (auto c : s.capabilities) caps.push_back(to_string(c));
  return json{{"surface_id", s.surface_id},
              {"kind", to_string(s.kind)},
              {"privacy", to_string(s.privacy)},
              {"capabilities", caps}};
}

json to_json(const StateEntry& e) {
  return json{{"value", e.value},
              {"confidence", e.confidence},
              {"updated_at_ms", e.updated_at_ms},
              {"contributors", e.contributors}};
}

json to_json(const SituationalState& s) {
  json vars = json::object();
  for (const auto& [name, entry] : s.variables) vars[to_string(name)] = to_json(entry);
  return json{{"session_id", s.session_id}, {"variables", vars}};
}

json to_json(const ConsentRecord& c) {
  return json{{"user_id", c.user_id},
              {"purpose", c.purpose},
              {"granted_at_ms", c.granted_at_ms},
              {"expires_at_ms", c.expires_at_ms},
              {"channel", c.channel}};
}

Result<ContextSignal> signal_from_json(const json& j) {
  if (!j.is_object()) return Result<ContextSignal>::failure("signal: not an object");
  ContextSignal s;
  try {
    s.signal_id = j.at("signal_id").get<std::string>();
    auto layer = layer_from_string(j.at("layer").get<std::string>());
    if (!layer.ok()) return Result<ContextSignal>::failure(layer.error);
    s.layer = *layer;
    s.channel = j.at("channel").get<std::string>();
    s.timestamp_ms = j.at("timestamp_ms").get<int64_t>();
    s.payload.fields = j.at("payload");
    s.payload.type = j.at("payload_type").get<std::string>();
    s.quality = j.at("quality").get<double>();
    const json& p = j.at("provenance");
    s.provenance.source_id = p.at("source_id").get<std::string>();
    auto sens = sensitivity_from_string(p.at("sensitivity").get<std::string>());
    if (!sens.ok()) return Result<ContextSignal>::failure(sens.error);
    s.provenance.sensitivity = *sens;
    auto acq = acquisition_from_string(p.at("acquisition").get<std::string>());
    if (!acq.ok()) return Result<ContextSignal>::failure(acq.error);
    s.provenance.acquisition = *acq;
    if (p.contains("note")) s.provenance.note = p.at("note").get<std::string>();
  } catch (const json::exception& e) {
    return Result<ContextSignal>::failure(std::string("signal: ") + e.what());
  }
  return Result<ContextSignal>::success(std::move(s));
}

Result<Surface> surface_from_json(const json& j) {
  if (!j.is_object()) return Result<Surface>::failure("surface: not an object");
  Surface s;
  try {
    s.surface_id = j.at("surface_id").get<std::string>();
    auto kind = surface_kind_from_string(j.at("kind").get<std::string>());
    if (!kind.ok()) return Result<Surface>::failure(kind.error);
    s.kind = *kind;
    auto priv = surface_privacy_from_string(j.at("privacy").get<std::string>());
    if (!priv.ok()) return Result<Surface>::failure(priv.error);
    s.privacy = *priv;
    for (const auto& c : j.at("capabilities")) {
      auto cap = capability_from_string(c.get<std::string>());
      if (!cap.ok()) return Result<Surface>::failure(cap.error);
      s.capabilities.insert(*cap);
    }
  } catch (const json::exception& e) {
    return Result<Surface>::failure(std::string("surface: ") + e.what());
  }
  auto check = validate_surface(s);
  if (!check.ok) return Result<Surface>::failure("surface: " + check.violations.front());
  return Result<Surface>::success(std::move(s));
}

Result<ConsentRecord> consent_from_json(const json& j) {
  if (!j.is_object()) return Result<ConsentRecord>::failure("consent: not an object");
  ConsentRecord c;
  try {
    c.user_id = j.at("user_id").get<std::string>();
    c.purpose = j.at("purpose").get<std::string>();
    c.granted_at_ms = j.at("granted_at_ms").get<int64_t>();
    c.expires_at_ms = j.at("expires_at_ms").get<int64_t>();
    c.channel = j.value("channel", std::string{});
  } catch (const json::exception& e) {
    return Result<ConsentRecord>::failure(std::string("consent: ") + e.what());
  }
  if (c.expires_at_ms <= c.granted_at_ms)
    return Result<ConsentRecord>::failure("consent: expires_at_ms must be after granted_at_ms");
  return Result<ConsentRecord>::success(std::move(c));
}

Result<SituationalState> state_from_json(const json& j) {
  if (!j.is_object()) return Result<SituationalState>::failure("state: not an object");
  SituationalState s;
  try {
    s.session_id = j.at("session_id").get<std::string>();
    for (const auto& [key, val] : j.at("variables").items()) {
      auto var = variable_from_string(key);
      if (!var.ok()) return Result<SituationalState>::failure(var.error);
      StateEntry e;
      e.value = val.at("value");
      e.confidence = val.at("confidence").get<double>();
      e.updated_at_ms = val.at("updated_at_ms").get<int64_t>();
      e.contributors = val.at("contributors").get<std::vector<std::string>>();
      s.variables[*var] = std::move(e);
    }
  } catch (const json::exception& e) {
    return Result<SituationalState>::failure(std::string("state: ") + e.what());
  }
  return Result<SituationalState>::success(std::move(s));
}

std::string canonical_dump(const json& j) { return j.dump(); }

bool channel_is_known(const std::string& channel) {
  return channel_schemas().count(channel) > 0;
}

ValidationResult validate_signal(const ContextSignal& s) {
  ValidationResult r;
  auto fail = [&r](std::string msg) {
    r.ok = false;
    r.violations.push_back(std::move(msg));
  };

  if (s.signal_id.empty()) fail("empty signal_id");
  if (s.channel.empty()) fail("empty channel");
  if (s.timestamp_ms < 0) fail("negative timestamp_ms");
  if (!(s.quality >= 0.0 && s.quality <= 1.0)) fail("quality out of range");
  if (s.payload.type != s.channel) fail("payload/channel mismatch");
  if (!s.payload.fields.is_object()) fail("payload is not an object");
  if (s.provenance.source_id.empty()) fail("empty provenance source_id");
  if (s.provenance.acquisition == Acquisition::Derived &&
      (!s.provenance.note || s.provenance.note->empty()))
    fail("derived signal missing parent reference in note");

  auto it = channel_schemas().find(s.channel);
  if (it != channel_schemas().end() && s.payload.fields.is_object()) {
    for (const auto& f : it->second) {
      if (!s.payload.fields.contains(f.name)) {
        if (f.required) fail(std::string("payload missing field: ") + f.name);
        continue;
      }
      if (!field_type_matches(s.payload.fields.at(f.name), f.type))
        fail(std::string("payload field has wrong type: ") + f.name);
    }
    if (s.channel == "occupancy" && s.payload.fields.value("count", 0) < 0)
      fail("occupancy count must be >= 0");
    if (s.channel == "risk_score") {
      double v = s.payload.fields.value("score", 0.0);
      if (!(v >= 0.0 && v <= 1.0)) fail("risk score out of range");
    }
  }
  return r;
}

ValidationResult validate_surface(const Surface& s) {
  ValidationResult r;
  auto fail = [&r](std::string msg) {
    r.ok = false;
    r.violations.push_back(std::move(msg));
  };
  if (s.surface_id.empty()) fail("empty surface_id");
  if ((s.kind == SurfaceKind::SharedDisplay || s.kind == SurfaceKind::AudioPublic) &&
      s.privacy != SurfacePrivacy::Shared)
    fail("shared_display/audio_public must have privacy=shared");
  if (s.kind == SurfaceKind::PersonalDevice && s.privacy != SurfacePrivacy::Personal)
    fail("personal_device must have privacy=personal");
  if (s.kind == SurfaceKind::StaffTerminal && s.privacy != SurfacePrivacy::Authenticated)
    fail("staff_terminal must have privacy=authenticated");
  return r;
}

std::string snapshot_hash(const SituationalState& state) {
  return sha256_hex(canonical_dump(to_json(state)));
}

}  // namespace ambient
