#pragma once
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ambient/context.hpp"

namespace ambient {

enum class TurnRole { User, Assistant, SystemEvent };

std::string to_string(TurnRole v);
Result<TurnRole> turn_role_from_string(const std::string& s);

struct DialogueTurn {
  int64_t turn_id = 0;
  TurnRole role = TurnRole::User;
  std::string text;
  TimestampMs timestamp_ms = 0;
  std::vector<std::string> active_context;  // variable names / signal ids in effect
};

json to_json(const DialogueTurn& t);

// Short-term memory is exactly the ordered turn list.
struct SessionTranscript {
  std::string session_id;
  std::vector<DialogueTurn> turns;

  // turn_id must be last+1 (starting at 1); gaps and duplicates are errors.
  Result<bool> append_turn(DialogueTurn turn);
};

enum class RetentionClass { SessionOnly, Days30, Days365, UntilRevoked };

std::string to_string(RetentionClass v);
Result<RetentionClass> retention_class_from_string(const std::string& s);

struct MemoryEntry {
  std::string entry_id;
  std::string user_id;
  enum class Kind { Summary, Preference, Fact } kind = Kind::Summary;
  std::string body;
  std::set<std::string> purpose_tags;
  TimestampMs created_at_ms = 0;
  RetentionClass retention_class = RetentionClass::Days30;
  std::optional<TimestampMs> expires_at_ms;  // absent for until_revoked
  std::optional<TimestampMs> corrected_at_ms;

  bool live(TimestampMs now_ms) const { return !expires_at_ms || *expires_at_ms > now_ms; }
};

std::string to_string(MemoryEntry::Kind v);
json to_json(const MemoryEntry& e);
Result<MemoryEntry> memory_entry_from_json(const json& j);

struct RetentionTable {
  std::map<std::string, RetentionClass> purpose_to_class;
  RetentionClass default_class = RetentionClass::Days30;

  RetentionClass for_purpose(const std::string& purpose) const;
};

Result<RetentionTable> retention_table_from_json(const json& j);

// Deterministic end-of-session extraction: latest intent -> summary entry,
// preference phrasings -> preference entries, interest statements -> fact
// entries. Purposes without consent are stripped; entries left with no
// consented purpose are dropped, as are session_only ones.
std::vector<MemoryEntry> distill_session(const SessionTranscript& session,
                                         const std::string& user_id,
                                         const std::string& latest_intent,
                                         const std::set<std::string>& consented_purposes,
                                         const RetentionTable& retention, TimestampMs now_ms);

class MemoryStore {
 public:
  void add(MemoryEntry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<MemoryEntry>& entries() const { return entries_; }

  // Term-overlap scoring with recency tie-break; expired entries never
  // surface; zero-overlap entries are not matches.
  std::vector<MemoryEntry> retrieve(const std::string& user_id,
                                    const std::set<std::string>& query_terms, size_t k,
                                    TimestampMs now_ms) const;

  // Removes entries with expires_at <= now. Idempotent.
  size_t purge_expired(TimestampMs now_ms);

  std::vector<MemoryEntry> list_for_user(const std::string& user_id, TimestampMs now_ms) const;
  Result<bool> remove(const std::string& user_id, const std::string& entry_id);
  Result<bool> correct(const std::string& user_id, const std::string& entry_id,
                       const std::string& new_body, TimestampMs now_ms);

  std::string to_jsonl() const;
  void save(const std::string& path) const;
  static Result<MemoryStore> load(const std::string& path);

 private:
  std::vector<MemoryEntry> entries_;
};

// Tokenization used by retrieval scoring (lowercased alnum runs).
std::set<std::string> memory_terms(const std::string& text);

struct MemoryRequestOutcome {
  std::string action;  // list | delete | correct
  std::vector<MemoryEntry> listed;
  std::string error;
  bool ok() const { return error.empty(); }
};

// Transparency operations: what the engine remembers, corrections, deletions.
// All three are meant to be audited by the caller.
MemoryRequestOutcome user_memory_request(const std::string& user_id, const json& request,
                                         MemoryStore& store, TimestampMs now_ms);

}  // namespace ambient
