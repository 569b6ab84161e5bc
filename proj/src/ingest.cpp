#include "ambient/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ambient/digest.hpp"

namespace ambient {

Result<SourceRegistration> registration_from_json(const json& j) {
  if (!j.is_object()) return Result<SourceRegistration>::failure("registration: not an object");
  SourceRegistration r;
  try {
    r.source_id = j.at("source_id").get<std::string>();
    auto layer = layer_from_string(j.at("layer").get<std::string>());
    if (!layer.ok()) return Result<SourceRegistration>::failure(layer.error);
    r.layer = *layer;
    r.clock_skew_ms = j.value("clock_skew_ms", int64_t{0});
    r.dedup_window_ms = j.value("dedup_window_ms", int64_t{0});
    r.default_quality = j.value("default_quality", 1.0);
  } catch (const json::exception& e) {
    return Result<SourceRegistration>::failure(std::string("registration: ") + e.what());
  }
  if (r.dedup_window_ms < 0)
    return Result<SourceRegistration>::failure("registration: dedup_window_ms must be >= 0");
  if (!(r.default_quality >= 0.0 && r.default_quality <= 1.0))
    return Result<SourceRegistration>::failure("registration: default_quality out of range");
  return Result<SourceRegistration>::success(std::move(r));
}

SourceRegistry load_registrations(const json& list) {
  SourceRegistry regs;
  for (const auto& item : list) {
    auto r = registration_from_json(item);
    if (!r.ok()) throw std::runtime_error(r.error);
    regs[r->source_id] = *r;
  }
  return regs;
}

Result<ContextSignal> normalize_event(const json& raw, const SourceRegistration& reg,
                                      uint64_t seq) {
  using R = Result<ContextSignal>;
  if (!raw.is_object()) return R::failure("event is not an object");

  ContextSignal s;
  s.layer = reg.layer;
  s.provenance.source_id = reg.source_id;

  if (!raw.contains("channel") || !raw.at("channel").is_string())
    return R::failure("missing field: channel");
  s.channel = raw.at("channel").get<std::string>();

  if (!raw.contains("timestamp_ms") || !raw.at("timestamp_ms").is_number_integer())
    return R::failure("missing field: timestamp_ms");
  s.timestamp_ms = raw.at("timestamp_ms").get<int64_t>();

  json payload = raw.value("payload", json::object());
  if (!payload.is_object()) return R::failure("payload is not an object");

  // Unit normalization. Sensors may report noise as linear amplitude and
  // distance in cm/mm; the shared representation is dB and meters.
  if (s.channel == "noise_db" && payload.contains("level_linear")) {
    double lin = payload.at("level_linear").get<double>();
    if (lin <= 0.0) return R::failure("level_linear must be > 0");
    payload["noise_db"] = 20.0 * std::log10(lin);
    payload.erase("level_linear");
  }
  if (payload.contains("distance_cm")) {
    payload["distance_m"] = payload.at("distance_cm").get<double>() / 100.0;
    payload.erase("distance_cm");
  }
  if (payload.contains("distance_mm")) {
    payload["distance_m"] = payload.at("distance_mm").get<double>() / 1000.0;
    payload.erase("distance_mm");
  }

  s.payload.fields = std::move(payload);
  s.payload.type = raw.value("payload_type", s.channel);

  s.quality = raw.contains("quality") ? raw.at("quality").get<double>() : reg.default_quality;

  if (raw.contains("sensitivity")) {
    auto sens = sensitivity_from_string(raw.at("sensitivity").get<std::string>());
    if (!sens.ok()) return R::failure(sens.error);
    s.provenance.sensitivity = *sens;
  } else {
    s.provenance.sensitivity =
        reg.layer == Layer::Enterprise ? Sensitivity::Confidential : Sensitivity::Internal;
  }
  if (raw.contains("acquisition")) {
    auto acq = acquisition_from_string(raw.at("acquisition").get<std::string>());
    if (!acq.ok()) return R::failure(acq.error);
    s.provenance.acquisition = *acq;
  }
  if (raw.contains("note")) s.provenance.note = raw.at("note").get<std::string>();

  if (raw.contains("signal_id")) {
    s.signal_id = raw.at("signal_id").get<std::string>();
  } else {
    char buf[32];
    std::snprintf(buf, sizeof(buf), ":%06llu", static_cast<unsigned long long>(seq));
    s.signal_id = reg.source_id + buf;
  }

  auto check = validate_signal(s);
  if (!check.ok) {
    std::string msg = check.violations.front();
    for (size_t i = 1; i < check.violations.size(); i++) msg += "; " + check.violations[i];
    return R::failure(msg);
  }
  return R::success(std::move(s));
}

Result<ContextSignal> align_timestamp(const ContextSignal& s, const SourceRegistration& reg) {
  ContextSignal out = s;
  out.timestamp_ms = s.timestamp_ms - reg.clock_skew_ms;
  if (out.timestamp_ms < 0) return Result<ContextSignal>::failure("pre-epoch timestamp");
  return Result<ContextSignal>::success(std::move(out));
}

bool DedupWindow::is_duplicate(const ContextSignal& s, int64_t window_ms) {
  std::string key = s.channel + "\x1f" + sha256_hex(canonical_dump(s.payload.fields));
  auto& kept = per_source_[s.provenance.source_id];
  for (const auto& k : kept) {
    if (k.key == key && std::llabs(s.timestamp_ms - k.at_ms) <= window_ms) return true;
  }
  kept.push_back({std::move(key), s.timestamp_ms});
  return false;
}

IngestResult ingest_stream(const std::vector<json>& events, const SourceRegistry& regs,
                           std::optional<int64_t> dedup_window_override) {
  IngestResult out;
  DedupWindow window;
  std::set<std::string> seen_ids;
  std::map<std::string, TimestampMs> last_per_source;

  for (size_t i = 0; i < events.size(); i++) {
    const json& ev = events[i];
    std::string source =
        ev.is_object() && ev.contains("source_id") && ev.at("source_id").is_string()
            ? ev.at("source_id").get<std::string>()
            : std::string{};
    auto reject = [&](std::string reason) {
      out.rejections.push_back({i, source, std::move(reason)});
    };

    if (source.empty()) {
      reject("missing field: source_id");
      continue;
    }
    auto reg_it = regs.find(source);
    if (reg_it == regs.end()) {
      reject("unregistered source");
      continue;
    }
    const SourceRegistration& reg = reg_it->second;

    auto normalized = normalize_event(ev, reg, i);
    if (!normalized.ok()) {
      reject(normalized.error);
      continue;
    }
    auto aligned = align_timestamp(*normalized, reg);
    if (!aligned.ok()) {
      reject(aligned.error);
      continue;
    }
    if (!seen_ids.insert(aligned->signal_id).second) {
      reject("duplicate signal_id: " + aligned->signal_id);
      continue;
    }
    int64_t win = dedup_window_override.value_or(reg.dedup_window_ms);
    if (window.is_duplicate(*aligned, win)) {
      reject("duplicate within dedup window");
      continue;
    }
    auto last = last_per_source.find(source);
    if (last != last_per_source.end() && aligned->timestamp_ms < last->second)
      out.warnings.push_back("out-of-order arrival: " + aligned->signal_id);
    last_per_source[source] = std::max(
        last == last_per_source.end() ? aligned->timestamp_ms : last->second,
        aligned->timestamp_ms);
    out.signals.push_back(std::move(*aligned));
  }

  // Per-source corrected-timestamp order; arrival order breaks ties, so the
  // result is deterministic for a given arrival sequence.
  std::stable_sort(out.signals.begin(), out.signals.end(),
                   [](const ContextSignal& a, const ContextSignal& b) {
                     return a.timestamp_ms < b.timestamp_ms;
                   });
  return out;
}

}  // namespace ambient
