#pragma once
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ambient/context.hpp"

namespace ambient {

struct SourceRegistration {
  std::string source_id;
  Layer layer = Layer::Physical;
  int64_t clock_skew_ms = 0;
  int64_t dedup_window_ms = 0;
  double default_quality = 1.0;
};

using SourceRegistry = std::map<std::string, SourceRegistration>;

Result<SourceRegistration> registration_from_json(const json& j);
SourceRegistry load_registrations(const json& list);  // throws on malformed entries

// Raw adapter event -> normalized ContextSignal. Fills layer/quality defaults
// from the registration, converts units (linear amplitude -> dB, cm/mm -> m),
// synthesizes a signal_id from (source, seq) when the event carries none, and
// runs validate_signal on the result.
Result<ContextSignal> normalize_event(const json& raw, const SourceRegistration& reg,
                                      uint64_t seq);

// timestamp' = timestamp - clock_skew. Rejects pre-epoch results.
Result<ContextSignal> align_timestamp(const ContextSignal& s, const SourceRegistration& reg);

// Per-source duplicate suppression keyed on (channel, canonical payload
// digest). Quality jitter does not defeat dedup; the first event wins.
class DedupWindow {
 public:
  // True when the signal duplicates an earlier kept signal from the same
  // source within window_ms (inclusive). Kept signals are recorded.
  bool is_duplicate(const ContextSignal& s, int64_t window_ms);

 private:
  struct Kept {
    std::string key;
    TimestampMs at_ms;
  };
  std::map<std::string, std::vector<Kept>> per_source_;
};

struct IngestRejection {
  size_t input_index = 0;
  std::string source_id;
  std::string reason;
};

struct IngestResult {
  std::vector<ContextSignal> signals;  // per-source corrected-timestamp order
  std::vector<IngestRejection> rejections;
  std::vector<std::string> warnings;  // e.g. out-of-order arrivals
};

// Full pipeline: normalize -> align -> dedup, applied in arrival order; never
// aborts on a bad event. rejections.size() + signals.size() == input size.
IngestResult ingest_stream(const std::vector<json>& events, const SourceRegistry& regs,
                           std::optional<int64_t> dedup_window_override = std::nullopt);

}  // namespace ambient
