#include "ambient/memory.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

namespace ambient {

namespace {

constexpr int64_t kDayMs = 24LL * 3600 * 1000;

}  // namespace

std::string to_string(TurnRole v) {
  switch (v) {
    case TurnRole::User:
      return "user";
    case TurnRole::Assistant:
      return "assistant";
    case TurnRole::SystemEvent:
      return "system_event";
  }
  return "?";
}

Result<TurnRole> turn_role_from_string(const std::string& s) {
  if (s == "user") return Result<TurnRole>::success(TurnRole::User);
  if (s == "assistant") return Result<TurnRole>::success(TurnRole::Assistant);
  if (s == "system_event") return Result<TurnRole>::success(TurnRole::SystemEvent);
  return Result<TurnRole>::failure("unknown turn role: " + s);
}

json to_json(const DialogueTurn& t) {
  return json{{"turn_id", t.turn_id},
              {"role", to_string(t.role)},
              {"text", t.text},
              {"timestamp_ms", t.timestamp_ms},
              {"active_context", t.active_context}};
}

Result<bool> SessionTranscript::append_turn(DialogueTurn turn) {
  int64_t expected = turns.empty() ? 1 : turns.back().turn_id + 1;
  if (turn.turn_id != expected)
    return Result<bool>::failure("turn_id must be " + std::to_string(expected) + ", got " +
                                 std::to_string(turn.turn_id));
  turns.push_back(std::move(turn));
  return Result<bool>::success(true);
}

std::string to_string(RetentionClass v) {
  switch (v) {
    case RetentionClass::SessionOnly:
      return "session_only";
    case RetentionClass::Days30:
      return "days_30";
    case RetentionClass::Days365:
      return "days_365";
    case RetentionClass::UntilRevoked:
      return "until_revoked";
  }
  return "?";
}

Result<RetentionClass> retention_class_from_string(const std::string& s) {
  using R = Result<RetentionClass>;
  if (s == "session_only") return R::success(RetentionClass::SessionOnly);
  if (s == "days_30") return R::success(RetentionClass::Days30);
  if (s == "days_365") return R::success(RetentionClass::Days365);
  if (s == "until_revoked") return R::success(RetentionClass::UntilRevoked);
  return R::failure("unknown retention class: " + s);
}

std::string to_string(MemoryEntry::Kind v) {
  switch (v) {
    case MemoryEntry::Kind::Summary:
      return "summary";
    case MemoryEntry::Kind::Preference:
      return "preference";
    case MemoryEntry::Kind::Fact:
      return "fact";
  }
  return "?";
}

json to_json(const MemoryEntry& e) {
  json tags = json::array();
  for (const auto& t : e.purpose_tags) tags.push_back(t);
  json j{{"entry_id", e.entry_id},
         {"user_id", e.user_id},
         {"kind", to_string(e.kind)},
         {"body", e.body},
         {"purpose_tags", tags},
         {"created_at_ms", e.created_at_ms},
         {"retention_class", to_string(e.retention_class)}};
  if (e.expires_at_ms) j["expires_at_ms"] = *e.expires_at_ms;
  if (e.corrected_at_ms) j["corrected_at_ms"] = *e.corrected_at_ms;
  return j;
}

Result<MemoryEntry> memory_entry_from_json(const json& j) {
  using R = Result<MemoryEntry>;
  if (!j.is_object()) return R::failure("memory entry: not an object");
  MemoryEntry e;
  try {
    e.entry_id = j.at("entry_id").get<std::string>();
    e.user_id = j.at("user_id").get<std::string>();
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "summary")
      e.kind = MemoryEntry::Kind::Summary;
    else if (kind == "preference")
      e.kind = MemoryEntry::Kind::Preference;
    else if (kind == "fact")
      e.kind = MemoryEntry::Kind::Fact;
    else
      return R::failure("unknown memory kind: " + kind);
    e.body = j.at("body").get<std::string>();
    for (const auto& t : j.at("purpose_tags")) e.purpose_tags.insert(t.get<std::string>());
    e.created_at_ms = j.at("created_at_ms").get<int64_t>();
    auto cls = retention_class_from_string(j.at("retention_class").get<std::string>());
    if (!cls.ok()) return R::failure(cls.error);
    e.retention_class = *cls;
    if (j.contains("expires_at_ms")) e.expires_at_ms = j.at("expires_at_ms").get<int64_t>();
    if (j.contains("corrected_at_ms"))
      e.corrected_at_ms = j.at("corrected_at_ms").get<int64_t>();
  } catch (const json::exception& ex) {
    return R::failure(std::string("memory entry: ") + ex.what());
  }
  return R::success(std::move(e));
}

RetentionClass RetentionTable::for_purpose(const std::string& purpose) const {
  auto it = purpose_to_class.find(purpose);
  return it == purpose_to_class.end() ? default_class : it->second;
}

Result<RetentionTable> retention_table_from_json(const json& j) {
  using R = Result<RetentionTable>;
  RetentionTable t;
  if (!j.is_object()) return R::failure("retention table: not an object");
  try {
    if (j.contains("default_class")) {
      auto cls = retention_class_from_string(j.at("default_class").get<std::string>());
      if (!cls.ok()) return R::failure(cls.error);
      t.default_class = *cls;
    }
    for (const auto& [purpose, cls_name] : j.value("purposes", json::object()).items()) {
      auto cls = retention_class_from_string(cls_name.get<std::string>());
      if (!cls.ok()) return R::failure(cls.error);
      t.purpose_to_class[purpose] = *cls;
    }
  } catch (const json::exception& e) {
    return R::failure(std::string("retention table: ") + e.what());
  }
  return R::success(std::move(t));
}

namespace {

std::optional<TimestampMs> expiry_for(RetentionClass cls, TimestampMs now_ms) {
  switch (cls) {
    case RetentionClass::SessionOnly:
      return now_ms;  // never persisted anyway
    case RetentionClass::Days30:
      return now_ms + 30 * kDayMs;
    case RetentionClass::Days365:
      return now_ms + 365 * kDayMs;
    case RetentionClass::UntilRevoked:
      return std::nullopt;
  }
  return now_ms;
}

std::string intent_label(const std::string& intent) {
  static const std::map<std::string, std::string> labels = {
      {"loan_inquiry", "a loan balance and payment history inquiry"},
      {"savings_inquiry", "interest in a savings plan"},
      {"block_card", "blocking a lost card"},
      {"transfer_funds", "a funds transfer"},
      {"schedule_appointment", "scheduling an appointment"},
      {"check_queue", "a queue status check"},
  };
  auto it = labels.find(intent);
  return it == labels.end() ? intent : it->second;
}

}  // namespace

std::vector<MemoryEntry> distill_session(const SessionTranscript& session,
                                         const std::string& user_id,
                                         const std::string& latest_intent,
                                         const std::set<std::string>& consented_purposes,
                                         const RetentionTable& retention, TimestampMs now_ms) {
  std::vector<MemoryEntry> candidates;
  size_t n = 0;
  auto make = [&](MemoryEntry::Kind kind, std::string body, std::string purpose) {
    MemoryEntry e;
    e.entry_id = "m-" + user_id + "-" + std::to_string(now_ms) + "-" + std::to_string(n++);
    e.user_id = user_id;
    e.kind = kind;
    e.body = std::move(body);
    e.purpose_tags = {std::move(purpose)};
    e.created_at_ms = now_ms;
    candidates.push_back(std::move(e));
  };

  if (!latest_intent.empty() && latest_intent != "unknown" && latest_intent != "greeting")
    make(MemoryEntry::Kind::Summary, "session covered " + intent_label(latest_intent),
         "service-history");

  static const std::regex prefer_re(R"(\bprefer(?:s|red)?\b\s*(.*))", std::regex::icase);
  static const std::regex brief_re(R"(keep it brief|be brief|short answers)",
                                   std::regex::icase);
  static const std::regex interest_re(R"(interest(?:ed)?\s+in\s+(?:a\s+|an\s+|the\s+)?([A-Za-z ]+))",
                                      std::regex::icase);
  for (const auto& turn : session.turns) {
    if (turn.role != TurnRole::User) continue;
    std::smatch m;
    if (std::regex_search(turn.text, m, prefer_re) && m[1].matched && m[1].length() > 0)
      make(MemoryEntry::Kind::Preference, "prefers " + m[1].str(), "preferences");
    else if (std::regex_search(turn.text, m, brief_re))
      make(MemoryEntry::Kind::Preference, "prefers brief responses", "preferences");
    if (std::regex_search(turn.text, m, interest_re)) {
      std::string topic = m[1].str();
      while (!topic.empty() && (topic.back() == ' ' || topic.back() == '.')) topic.pop_back();
      make(MemoryEntry::Kind::Fact, "interest in a " + topic, "service-history");
    }
  }

  std::vector<MemoryEntry> out;
  for (auto& e : candidates) {
    std::set<std::string> kept;
    for (const auto& tag : e.purpose_tags)
      if (consented_purposes.count(tag)) kept.insert(tag);
    if (kept.empty()) continue;  // no consent, not persisted
    e.purpose_tags = std::move(kept);
    e.retention_class = retention.for_purpose(*e.purpose_tags.begin());
    if (e.retention_class == RetentionClass::SessionOnly) continue;
    e.expires_at_ms = expiry_for(e.retention_class, now_ms);
    out.push_back(std::move(e));
  }
  return out;
}

std::set<std::string> memory_terms(const std::string& text) {
  std::set<std::string> terms;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur += char(std::tolower(static_cast<unsigned char>(ch)));
    } else if (!cur.empty()) {
      terms.insert(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) terms.insert(cur);
  return terms;
}

std::vector<MemoryEntry> MemoryStore::retrieve(const std::string& user_id,
                                               const std::set<std::string>& query_terms,
                                               size_t k, TimestampMs now_ms) const {
  struct Scored {
    size_t overlap;
    const MemoryEntry* entry;
  };
  std::vector<Scored> scored;
  for (const auto& e : entries_) {
    if (e.user_id != user_id || !e.live(now_ms)) continue;
    auto terms = memory_terms(e.body);
    size_t overlap = 0;
    for (const auto& q : query_terms) overlap += terms.count(q);
    if (overlap == 0) continue;
    scored.push_back({overlap, &e});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.entry->created_at_ms != b.entry->created_at_ms)
      return a.entry->created_at_ms > b.entry->created_at_ms;
    return a.entry->entry_id < b.entry->entry_id;
  });
  std::vector<MemoryEntry> out;
  for (const auto& s : scored) {
    if (out.size() >= k) break;
    out.push_back(*s.entry);
  }
  return out;
}

size_t MemoryStore::purge_expired(TimestampMs now_ms) {
  size_t before = entries_.size();
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                [&](const MemoryEntry& e) { return !e.live(now_ms); }),
                 entries_.end());
  return before - entries_.size();
}

std::vector<MemoryEntry> MemoryStore::list_for_user(const std::string& user_id,
                                                    TimestampMs now_ms) const {
  std::vector<MemoryEntry> out;
  for (const auto& e : entries_)
    if (e.user_id == user_id && e.live(now_ms)) out.push_back(e);
  return out;
}

Result<bool> MemoryStore::remove(const std::string& user_id, const std::string& entry_id) {
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->entry_id == entry_id) {
      if (it->user_id != user_id) return Result<bool>::failure("not found");
      entries_.erase(it);
      return Result<bool>::success(true);
    }
  }
  return Result<bool>::failure("not found");
}

Result<bool> MemoryStore::correct(const std::string& user_id, const std::string& entry_id,
                                  const std::string& new_body, TimestampMs now_ms) {
  for (auto& e : entries_) {
    if (e.entry_id == entry_id) {
      if (e.user_id != user_id) return Result<bool>::failure("not found");
      e.body = new_body;
      e.corrected_at_ms = now_ms;
      return Result<bool>::success(true);
    }
  }
  return Result<bool>::failure("not found");
}

std::string MemoryStore::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) {
    out += canonical_dump(to_json(e));
    out += '\n';
  }
  return out;
}

void MemoryStore::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write memory store: " + path);
  f << to_jsonl();
}

Result<MemoryStore> MemoryStore::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return Result<MemoryStore>::failure("cannot open memory store: " + path);
  MemoryStore store;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    lineno++;
    if (line.empty()) continue;
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded())
      return Result<MemoryStore>::failure("memory store line " + std::to_string(lineno) +
                                          ": parse error");
    auto entry = memory_entry_from_json(parsed);
    if (!entry.ok())
      return Result<MemoryStore>::failure("memory store line " + std::to_string(lineno) + ": " +
                                          entry.error);
    store.add(std::move(*entry));
  }
  return Result<MemoryStore>::success(std::move(store));
}

MemoryRequestOutcome user_memory_request(const std::string& user_id, const json& request,
                                         MemoryStore& store, TimestampMs now_ms) {
  MemoryRequestOutcome out;
  std::string action = request.value("action", "");
  out.action = action;
  if (action == "list") {
    out.listed = store.list_for_user(user_id, now_ms);
    return out;
  }
  if (action == "delete") {
    auto r = store.remove(user_id, request.value("entry_id", ""));
    if (!r.ok()) out.error = r.error;
    return out;
  }
  if (action == "correct") {
    auto r = store.correct(user_id, request.value("entry_id", ""),
                           request.value("body", ""), now_ms);
    if (!r.ok()) out.error = r.error;
    return out;
  }
  out.error = "unknown action: " + action;
  return out;
}

}  // namespace ambient
