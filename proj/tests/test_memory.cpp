#include <doctest.h>

#include <random>

#include "ambient/memory.hpp"

using namespace ambient;

namespace {

constexpr int64_t kDay = 24LL * 3600 * 1000;

RetentionTable default_retention() {
  RetentionTable t;
  t.purpose_to_class["service-history"] = RetentionClass::Days365;
  t.purpose_to_class["preferences"] = RetentionClass::UntilRevoked;
  t.purpose_to_class["transcripts"] = RetentionClass::SessionOnly;
  return t;
}

SessionTranscript transcript_with(const std::vector<std::pair<TurnRole, std::string>>& turns) {
  SessionTranscript t;
  t.session_id = "s1";
  int64_t id = 1;
  for (const auto& [role, text] : turns) {
    DialogueTurn turn;
    turn.turn_id = id++;
    turn.role = role;
    turn.text = text;
    turn.timestamp_ms = id * 100;
    REQUIRE(t.append_turn(turn).ok());
  }
  return t;
}

MemoryEntry entry_of(const std::string& id, const std::string& user, const std::string& body,
                     int64_t created, std::optional<int64_t> expires,
                     MemoryEntry::Kind kind = MemoryEntry::Kind::Fact) {
  MemoryEntry e;
  e.entry_id = id;
  e.user_id = user;
  e.kind = kind;
  e.body = body;
  e.purpose_tags = {"service-history"};
  e.created_at_ms = created;
  e.retention_class = expires ? RetentionClass::Days30 : RetentionClass::UntilRevoked;
  e.expires_at_ms = expires;
  return e;
}

}  // namespace

TEST_CASE("append_turn: base case, duplicates, gaps, ordering") {
  SessionTranscript t;
  t.session_id = "s1";
  DialogueTurn turn;
  turn.turn_id = 1;
  turn.role = TurnRole::User;
  turn.text = "hello";
  CHECK(t.append_turn(turn).ok());
  CHECK(t.turns.size() == 1);

  CHECK_FALSE(t.append_turn(turn).ok());  // duplicate id

  DialogueTurn gap;
  gap.turn_id = 5;
  CHECK_FALSE(t.append_turn(gap).ok());

  DialogueTurn second;
  second.turn_id = 2;
  second.role = TurnRole::Assistant;
  second.text = "hi";
  DialogueTurn third;
  third.turn_id = 3;
  third.role = TurnRole::User;
  third.text = "thanks";
  CHECK(t.append_turn(second).ok());
  CHECK(t.append_turn(third).ok());
  CHECK(t.turns[0].text == "hello");
  CHECK(t.turns[1].text == "hi");
  CHECK(t.turns[2].text == "thanks");
}

TEST_CASE("distill: intent summary with consented purpose lands in days_365") {
  auto t = transcript_with({{TurnRole::User, "what's my loan balance"},
                            {TurnRole::Assistant, "here it is"}});
  auto entries = distill_session(t, "u1", "loan_inquiry", {"service-history"},
                                 default_retention(), 1000);
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].kind == MemoryEntry::Kind::Summary);
  CHECK(entries[0].retention_class == RetentionClass::Days365);
  REQUIRE(entries[0].expires_at_ms.has_value());
  CHECK(*entries[0].expires_at_ms == 1000 + 365 * kDay);
  CHECK(entries[0].purpose_tags == std::set<std::string>{"service-history"});
}

TEST_CASE("distill: preference phrasing becomes an until_revoked preference entry") {
  auto t = transcript_with({{TurnRole::User, "please keep it brief"}});
  auto entries =
      distill_session(t, "u1", "", {"preferences"}, default_retention(), 1000);
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].kind == MemoryEntry::Kind::Preference);
  CHECK(entries[0].retention_class == RetentionClass::UntilRevoked);
  CHECK_FALSE(entries[0].expires_at_ms.has_value());
}

TEST_CASE("distill: interest statements become facts") {
  auto t = transcript_with({{TurnRole::User, "I'm interested in a savings plan."}});
  auto entries = distill_session(t, "u1", "savings_inquiry", {"service-history"},
                                 default_retention(), 500);
  REQUIRE(entries.size() == 2);  // summary + fact
  bool fact_found = false;
  for (const auto& e : entries)
    if (e.kind == MemoryEntry::Kind::Fact) {
      fact_found = true;
      CHECK(e.body.find("savings plan") != std::string::npos);
    }
  CHECK(fact_found);
}

TEST_CASE("distill: no consented purposes means nothing persists") {
  auto t = transcript_with({{TurnRole::User, "I'm interested in a savings plan"},
                            {TurnRole::User, "please keep it brief"}});
  auto entries = distill_session(t, "u1", "loan_inquiry", {}, default_retention(), 500);
  CHECK(entries.empty());
}

TEST_CASE("distill: consent filtering keeps only consented tags") {
  auto t = transcript_with({{TurnRole::User, "I'm interested in a savings plan"},
                            {TurnRole::User, "I prefer morning appointments"}});
  auto entries = distill_session(t, "u1", "savings_inquiry", {"preferences"},
                                 default_retention(), 500);
  for (const auto& e : entries) {
    CHECK(e.purpose_tags == std::set<std::string>{"preferences"});
    CHECK(e.kind == MemoryEntry::Kind::Preference);
  }
}

TEST_CASE("retrieve: overlap scoring on a three-entry store, hand-checked") {
  MemoryStore store;
  store.add(entry_of("m-1", "u1", "interest in a savings plan", 100, std::nullopt));
  store.add(entry_of("m-2", "u1", "prefers the gold card", 200, std::nullopt,
                     MemoryEntry::Kind::Preference));
  store.add(entry_of("m-3", "u1", "asked about mortgage rates", 300, std::nullopt));

  auto hits = store.retrieve("u1", {"savings"}, 3, 1000);
  REQUIRE(hits.size() == 1);  // zero-overlap entries are not matches
  CHECK(hits[0].entry_id == "m-1");

  // two-term query: savings entry scores 2, mortgage scores 1
  auto ranked = store.retrieve("u1", {"savings", "plan", "mortgage"}, 3, 1000);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].entry_id == "m-1");
  CHECK(ranked[1].entry_id == "m-3");
}

TEST_CASE("retrieve: k=0 yields nothing; expired entries never surface") {
  MemoryStore store;
  store.add(entry_of("m-1", "u1", "savings plan", 100, 500));
  CHECK(store.retrieve("u1", {"savings"}, 0, 200).empty());
  CHECK(store.retrieve("u1", {"savings"}, 3, 200).size() == 1);
  CHECK(store.retrieve("u1", {"savings"}, 3, 500).empty());  // expires_at <= now
}

TEST_CASE("retrieve: recency then entry_id tie-breaks; deterministic order") {
  MemoryStore store;
  store.add(entry_of("m-b", "u1", "savings question", 100, std::nullopt));
  store.add(entry_of("m-a", "u1", "savings question", 100, std::nullopt));
  store.add(entry_of("m-c", "u1", "savings question", 400, std::nullopt));
  auto hits = store.retrieve("u1", {"savings"}, 3, 1000);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].entry_id == "m-c");  // newest first
  CHECK(hits[1].entry_id == "m-a");  // then lexicographic id
  CHECK(hits[2].entry_id == "m-b");

  auto again = store.retrieve("u1", {"savings"}, 3, 1000);
  for (size_t i = 0; i < hits.size(); i++) CHECK(hits[i].entry_id == again[i].entry_id);
}

TEST_CASE("purge: exclusive-live boundary and idempotence; until_revoked survives") {
  MemoryStore store;
  store.add(entry_of("m-1", "u1", "a", 0, 100));
  store.add(entry_of("m-2", "u1", "b", 0, 200));
  store.add(entry_of("m-3", "u1", "c", 0, std::nullopt));  // until_revoked

  CHECK(store.purge_expired(100) == 1);  // expires_at == now is purged
  CHECK(store.entries().size() == 2);
  CHECK(store.purge_expired(100) == 0);  // idempotent
  store.purge_expired(10000);
  REQUIRE(store.entries().size() == 1);
  CHECK(store.entries()[0].entry_id == "m-3");
}

TEST_CASE("user_memory_request: list, delete, correct") {
  MemoryStore store;
  store.add(entry_of("m-1", "u1", "interest in a savings plan", 100, std::nullopt));
  store.add(entry_of("m-2", "u2", "someone else's entry", 100, std::nullopt));

  auto listed = user_memory_request("u1", json{{"action", "list"}}, store, 200);
  REQUIRE(listed.ok());
  REQUIRE(listed.listed.size() == 1);
  CHECK(listed.listed[0].entry_id == "m-1");

  auto corrected = user_memory_request(
      "u1", json{{"action", "correct"}, {"entry_id", "m-1"}, {"body", "prefers ISA savings"}},
      store, 300);
  REQUIRE(corrected.ok());
  auto hits = store.retrieve("u1", {"isa"}, 1, 400);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].corrected_at_ms == 300);

  // foreign entry is "not found"
  auto foreign = user_memory_request("u1", json{{"action", "delete"}, {"entry_id", "m-2"}},
                                     store, 300);
  CHECK_FALSE(foreign.ok());
  CHECK(foreign.error == "not found");

  auto removed = user_memory_request("u1", json{{"action", "delete"}, {"entry_id", "m-1"}},
                                     store, 300);
  REQUIRE(removed.ok());
  CHECK(store.retrieve("u1", {"savings"}, 3, 400).empty());

  auto missing = user_memory_request("u1", json{{"action", "delete"}, {"entry_id", "m-1"}},
                                     store, 300);
  CHECK_FALSE(missing.ok());
}

TEST_CASE("deletion is permanent across purges and retrieves") {
  MemoryStore store;
  store.add(entry_of("m-1", "u1", "savings plan fan", 100, std::nullopt));
  REQUIRE(store.remove("u1", "m-1").ok());
  for (int64_t t : {200, 400, 800}) {
    store.purge_expired(t);
    CHECK(store.retrieve("u1", {"savings"}, 5, t).empty());
    CHECK(store.list_for_user("u1", t).empty());
  }
}

TEST_CASE("retention soundness over randomized stores") {
  std::mt19937_64 rng(2718);
  for (int trial = 0; trial < 50; trial++) {
    MemoryStore store;
    int64_t now = 1000 + int64_t(rng() % 100000);
    for (int i = 0; i < 40; i++) {
      std::optional<int64_t> expires;
      if (rng() % 3) expires = int64_t(rng() % (2 * now));
      store.add(entry_of("m-" + std::to_string(trial) + "-" + std::to_string(i), "u1",
                         "topic savings branch " + std::to_string(i), int64_t(rng() % now),
                         expires));
    }
    store.purge_expired(now);
    for (const auto& e : store.entries())
      CHECK((!e.expires_at_ms || *e.expires_at_ms > now));
    auto hits = store.retrieve("u1", {"savings"}, 50, now);
    for (const auto& h : hits)
      CHECK((!h.expires_at_ms || *h.expires_at_ms > now));
  }
}

TEST_CASE("store round-trips through JSONL") {
  MemoryStore store;
  store.add(entry_of("m-1", "u1", "interest in a savings plan", 100, 500));
  store.add(entry_of("m-2", "u1", "prefers brief responses", 200, std::nullopt,
                     MemoryEntry::Kind::Preference));
  std::string path = "test_memory_roundtrip.jsonl";
  store.save(path);
  auto loaded = MemoryStore::load(path);
  REQUIRE(loaded.ok());
  REQUIRE(loaded->entries().size() == 2);
  CHECK(loaded->to_jsonl() == store.to_jsonl());
  std::remove(path.c_str());
}
