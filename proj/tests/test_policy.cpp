#include <doctest.h>

#include <random>

#include "ambient/engine.hpp"
#include "ambient/policy.hpp"

using namespace ambient;

namespace {

PolicyTable table() { return *load_policy_table(default_policy_table_json()); }

ConsentRecord consent(const std::string& user, const std::string& purpose, int64_t granted,
                      int64_t expires) {
  return ConsentRecord{user, purpose, granted, expires, "kiosk"};
}

AccessRequest request(Sensitivity cls, const std::string& purpose, AuthLevel auth,
                      std::optional<ConsentRecord> c, int64_t now) {
  return AccessRequest{"u1", cls, purpose, auth, std::move(c), now};
}

Surface shared_display() {
  return Surface{"lobby-1", SurfaceKind::SharedDisplay, SurfacePrivacy::Shared,
                 {Capability::Visual, Capability::Text}};
}
Surface personal_device() {
  return Surface{"phone-1", SurfaceKind::PersonalDevice, SurfacePrivacy::Personal,
                 {Capability::Visual, Capability::Text}};
}
Surface staff_terminal() {
  return Surface{"staff-1", SurfaceKind::StaffTerminal, SurfacePrivacy::Authenticated,
                 {Capability::Text}};
}

ContentItem pii_item() {
  ContentItem i;
  i.item_id = "balance-1";
  i.body = "Account balance: $18,250.17";
  i.pii = true;
  i.sensitivity = Sensitivity::Restricted;
  i.source = "account_activity";
  return i;
}

}  // namespace

TEST_CASE("public data is allowed anonymously") {
  auto d = evaluate_access(request(Sensitivity::Public, "session-context",
                                   AuthLevel::Anonymous, std::nullopt, 100),
                           table());
  CHECK(d.outcome == Outcome::Allow);
}

TEST_CASE("restricted transaction history without consent requires consent") {
  auto d = evaluate_access(request(Sensitivity::Restricted, "transaction-history",
                                   AuthLevel::Authenticated, std::nullopt, 100),
                           table());
  REQUIRE(d.outcome == Outcome::Require);
  CHECK(d.required_step == RequiredStep::Consent);
}

TEST_CASE("consent expiring exactly at now counts as expired") {
  auto d = evaluate_access(
      request(Sensitivity::Restricted, "transaction-history", AuthLevel::StepUp,
              consent("u1", "transaction-history", 0, 100), 100),
      table());
  REQUIRE(d.outcome == Outcome::Require);
  CHECK(d.required_step == RequiredStep::Consent);

  auto ok = evaluate_access(
      request(Sensitivity::Restricted, "transaction-history", AuthLevel::StepUp,
              consent("u1", "transaction-history", 0, 101), 100),
      table());
  CHECK(ok.outcome == Outcome::Allow);
}

TEST_CASE("auth below minimum requires step-up when consent holds") {
  auto d = evaluate_access(
      request(Sensitivity::Restricted, "transaction-history", AuthLevel::Anonymous,
              consent("u1", "transaction-history", 0, 1000), 100),
      table());
  REQUIRE(d.outcome == Outcome::Require);
  CHECK(d.required_step == RequiredStep::StepUpAuth);
}

TEST_CASE("consent is requested before step-up when both are missing") {
  auto d = evaluate_access(request(Sensitivity::Restricted, "transaction-history",
                                   AuthLevel::Anonymous, std::nullopt, 100),
                           table());
  REQUIRE(d.outcome == Outcome::Require);
  CHECK(d.required_step == RequiredStep::Consent);
}

TEST_CASE("deny-by-default: unlisted purpose is denied regardless of auth/consent") {
  auto d = evaluate_access(
      request(Sensitivity::Restricted, "marketing-profile", AuthLevel::StepUp,
              consent("u1", "marketing-profile", 0, 1000), 100),
      table());
  CHECK(d.outcome == Outcome::Deny);
  CHECK(d.reason.find("purpose limitation") != std::string::npos);
}

TEST_CASE("malformed request (consent mismatch) is denied") {
  auto d = evaluate_access(
      request(Sensitivity::Restricted, "transaction-history", AuthLevel::StepUp,
              consent("someone-else", "transaction-history", 0, 1000), 100),
      table());
  CHECK(d.outcome == Outcome::Deny);
  CHECK(d.reason == "invalid request");
}

TEST_CASE("monotonicity in auth level") {
  auto t = table();
  const AuthLevel levels[] = {AuthLevel::Anonymous, AuthLevel::Authenticated,
                              AuthLevel::StepUp};
  const Sensitivity classes[] = {Sensitivity::Public, Sensitivity::Internal,
                                 Sensitivity::Confidential, Sensitivity::Restricted};
  const char* purposes[] = {"session-context", "appointment-lookup", "service-history",
                            "transaction-history"};
  for (auto cls : classes)
    for (auto purpose : purposes)
      for (bool with_consent : {false, true}) {
        std::optional<ConsentRecord> c;
        if (with_consent) c = consent("u1", purpose, 0, 10000);
        bool allowed_below = false;
        for (auto level : levels) {
          auto d = evaluate_access(request(cls, purpose, level, c, 100), t);
          if (allowed_below) CHECK(d.outcome == Outcome::Allow);
          if (d.outcome == Outcome::Allow) allowed_below = true;
        }
      }
}

TEST_CASE("select_surface: pii goes to the personal device") {
  auto chosen = select_surface(pii_item(), {shared_display(), personal_device()});
  REQUIRE(chosen.ok());
  CHECK(chosen->surface_id == "phone-1");
}

TEST_CASE("select_surface: pii falls back to authenticated, never shared") {
  auto chosen = select_surface(pii_item(), {shared_display(), staff_terminal()});
  REQUIRE(chosen.ok());
  CHECK(chosen->surface_id == "staff-1");

  auto none = select_surface(pii_item(), {shared_display()});
  REQUIRE_FALSE(none.ok());
  CHECK(none.error == "no private surface");
}

TEST_CASE("select_surface: non-pii prefers the richest capability set") {
  ContentItem notice;
  notice.item_id = "wait-1";
  notice.body = "Estimated wait: 12 minutes";
  notice.pii = false;
  notice.sensitivity = Sensitivity::Public;

  Surface audio{"spk-1", SurfaceKind::AudioPublic, SurfacePrivacy::Shared, {Capability::Audio}};
  auto chosen = select_surface(notice, {audio, shared_display()});
  REQUIRE(chosen.ok());
  CHECK(chosen->surface_id == "lobby-1");  // visual+text beats audio

  auto only = select_surface(notice, {shared_display()});
  REQUIRE(only.ok());
  CHECK(only->surface_id == "lobby-1");
}

TEST_CASE("selective-disclosure safety: fuzzed items never route pii to shared") {
  std::mt19937_64 rng(31337);
  std::vector<Surface> pool = {
      shared_display(), personal_device(), staff_terminal(),
      Surface{"spk-pub", SurfaceKind::AudioPublic, SurfacePrivacy::Shared, {Capability::Audio}},
      Surface{"spk-prv", SurfaceKind::AudioPrivate, SurfacePrivacy::Personal,
              {Capability::Audio}},
      Surface{"kiosk-2", SurfaceKind::KioskScreen, SurfacePrivacy::Authenticated,
              {Capability::Visual, Capability::Text, Capability::Audio}}};
  for (int trial = 0; trial < 500; trial++) {
    std::vector<Surface> available;
    for (const auto& s : pool)
      if (rng() % 2) available.push_back(s);
    if (available.empty()) continue;
    ContentItem item;
    item.item_id = "i";
    item.body = "x";
    item.pii = rng() % 2 == 0;
    item.sensitivity = item.pii ? Sensitivity::Restricted : Sensitivity::Internal;
    auto chosen = select_surface(item, available);
    if (!chosen.ok()) continue;
    if (item.pii) CHECK(chosen->privacy != SurfacePrivacy::Shared);
  }
}

TEST_CASE("redact_for_surface: pii on shared collapses to the placeholder") {
  auto redacted = redact_for_surface(pii_item(), shared_display());
  CHECK(redacted.body == kRedactedPlaceholder);
  CHECK_FALSE(redacted.pii);
  CHECK(redacted.sensitivity == Sensitivity::Public);
  CHECK(redacted.item_id == "balance-1");  // audit linkage retained
}

TEST_CASE("redact_for_surface: identity on private surfaces and for non-pii") {
  auto same = redact_for_surface(pii_item(), personal_device());
  CHECK(same.body == pii_item().body);
  CHECK(same.pii);

  ContentItem notice;
  notice.item_id = "n";
  notice.body = "queue is short";
  auto untouched = redact_for_surface(notice, shared_display());
  CHECK(untouched.body == "queue is short");
}

TEST_CASE("evaluate_consent picks the most recent unexpired record") {
  ConsentStore store;
  store.grant(consent("u1", "transaction-history", 0, 50));     // expired at now=100
  store.grant(consent("u1", "transaction-history", 10, 500));   // live
  store.grant(consent("u1", "transaction-history", 5, 800));    // live but older grant
  store.grant(consent("u2", "transaction-history", 90, 900));   // other user

  auto found = evaluate_consent("u1", "transaction-history", store, 100);
  REQUIRE(found.has_value());
  CHECK(found->granted_at_ms == 10);

  CHECK_FALSE(evaluate_consent("u1", "appointment-lookup", store, 100).has_value());

  // record expiring exactly at now is not returned
  ConsentStore boundary;
  boundary.grant(consent("u1", "p", 0, 100));
  CHECK_FALSE(evaluate_consent("u1", "p", boundary, 100).has_value());
}

TEST_CASE("policy lint flags structural problems") {
  CHECK(lint_policy_table(default_policy_table_json()).empty());

  json bad{{"entries",
            json::array({{{"data_class", "secret"},
                          {"min_auth", "root"},
                          {"purposes", json::array()}}})}};
  auto problems = lint_policy_table(bad);
  CHECK(problems.size() >= 3);

  json dup = default_policy_table_json();
  dup["entries"].push_back(dup["entries"][0]);
  auto dup_problems = lint_policy_table(dup);
  REQUIRE_FALSE(dup_problems.empty());
  bool found = false;
  for (const auto& p : dup_problems) found = found || p.find("duplicate") != std::string::npos;
  CHECK(found);
}
