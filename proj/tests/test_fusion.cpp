#include <doctest.h>

#include <cmath>
#include <random>

#include "ambient/fusion.hpp"

using namespace ambient;

namespace {

ContextSignal signal_of(const std::string& id, const std::string& channel, json payload,
                        double quality, int64_t t, const std::string& source) {
  ContextSignal s;
  s.signal_id = id;
  s.channel = channel;
  s.payload.type = channel;
  s.payload.fields = std::move(payload);
  s.quality = quality;
  s.timestamp_ms = t;
  s.provenance.source_id = source;
  return s;
}

Candidate cand(json value, double score, int64_t t, const std::string& source,
               const std::string& id) {
  return Candidate{std::move(value), score, t, source, id};
}

}  // namespace

TEST_CASE("apply_signal records a weighted candidate") {
  FusionConfig cfg;
  FusionState state("s1");
  auto s = signal_of("p1", "presence", json{{"present", true}}, 0.9, 1000, "cam-1");
  auto outcome = state.apply_signal(s, cfg);
  CHECK(outcome.used);
  const StateEntry* e = state.state().find(VariableName::UserPresent);
  REQUIRE(e);
  CHECK(e->value == json(true));
  CHECK(e->confidence == doctest::Approx(0.9));
}

TEST_CASE("unmapped channel leaves state unchanged and is reported") {
  FusionConfig cfg;
  FusionState state("s1");
  auto s = signal_of("h1", "humidity", json{{"rh", 40}}, 0.5, 100, "sensor-9");
  auto before = snapshot_hash(state.state());
  auto outcome = state.apply_signal(s, cfg);
  CHECK_FALSE(outcome.used);
  CHECK(snapshot_hash(state.state()) == before);
  REQUIRE(state.unused_reports().size() == 1);
  CHECK(state.unused_reports()[0].find("humidity") != std::string::npos);
}

TEST_CASE("two localization sources accumulate candidates") {
  FusionConfig cfg;
  FusionState state("s1");
  state.apply_signal(
      signal_of("c1", "camera_localization", json{{"zone", "counter"}}, 0.9, 100, "cam-1"),
      cfg);
  state.apply_signal(
      signal_of("b1", "ble_localization", json{{"zone", "waiting_area"}}, 0.6, 120, "ble-1"),
      cfg);
  const StateEntry* e = state.state().find(VariableName::UserPosition);
  REQUIRE(e);
  CHECK(e->contributors.size() == 2);
}

TEST_CASE("resolve_conflict: disagreeing sources scale confidence by agreement") {
  FusionConfig cfg;  // penalty 0.5
  auto entry = resolve_conflict({cand("counter", 0.9, 100, "cam-1", "c1"),
                                 cand("waiting_area", 0.6, 120, "ble-1", "b1")},
                                cfg);
  CHECK(entry.value == json("counter"));
  // 0.9 * (1 - 0.5 * 0.6/0.9) = 0.6, hand-evaluated; bit-exact against the
  // same IEEE expression.
  double expected = 0.9 * (1.0 - 0.5 * (0.6 / 0.9));
  CHECK(entry.confidence == expected);
  CHECK(entry.confidence == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("resolve_conflict: agreeing candidates keep the winner score") {
  FusionConfig cfg;
  auto entry = resolve_conflict(
      {cand("lobby", 0.8, 100, "a", "s1"), cand("lobby", 0.5, 110, "b", "s2")}, cfg);
  CHECK(entry.value == json("lobby"));
  CHECK(entry.confidence == 0.8);
}

TEST_CASE("resolve_conflict: no candidates means unknown") {
  FusionConfig cfg;
  auto entry = resolve_conflict({}, cfg);
  CHECK(entry.unknown());
  CHECK(entry.confidence == 0.0);
}

TEST_CASE("resolve_conflict: single candidate returns its exact score") {
  FusionConfig cfg;
  for (double score : {0.05, 0.33, 0.71, 1.0}) {
    auto entry = resolve_conflict({cand("x", score, 10, "a", "s")}, cfg);
    CHECK(entry.confidence == score);
  }
}

TEST_CASE("resolve_conflict tie-break: recency then lexicographic source") {
  FusionConfig cfg;
  auto by_recency = resolve_conflict(
      {cand("a", 0.7, 100, "s-b", "1"), cand("b", 0.7, 200, "s-a", "2")}, cfg);
  CHECK(by_recency.value == json("b"));
  auto by_source = resolve_conflict(
      {cand("a", 0.7, 100, "s-b", "1"), cand("b", 0.7, 100, "s-a", "2")}, cfg);
  CHECK(by_source.value == json("b"));  // s-a < s-b
}

TEST_CASE("confidence never exceeds the best contributing score") {
  std::mt19937_64 rng(42);
  FusionConfig cfg;
  for (int trial = 0; trial < 200; trial++) {
    std::vector<Candidate> candidates;
    size_t n = 1 + rng() % 5;
    double best = 0;
    for (size_t i = 0; i < n; i++) {
      double score = double(rng() % 1000) / 1000.0;
      best = std::max(best, score);
      candidates.push_back(cand(json(int(rng() % 3)), score, int64_t(rng() % 1000),
                                "src-" + std::to_string(rng() % 4),
                                "sig-" + std::to_string(i)));
    }
    auto entry = resolve_conflict(candidates, cfg);
    CHECK(entry.confidence <= best + 1e-12);
  }
}

TEST_CASE("decay: elapsed == tau gives confidence/e within 1e-9 relative") {
  FusionConfig cfg;
  cfg.decay_tau_ms[VariableName::UserPresent] = 10000.0;
  cfg.ttl_ms[VariableName::UserPresent] = 100000;
  SituationalState s;
  s.session_id = "s1";
  s.variables[VariableName::UserPresent] = StateEntry{json(true), 0.9, 0, {"p"}};
  auto decayed = decay_confidence(s, 10000, cfg);
  double expected = 0.9 * std::exp(-1.0);  // 0.331091497054298...
  double actual = decayed.variables[VariableName::UserPresent].confidence;
  CHECK(std::abs(actual - expected) / expected < 1e-9);
  CHECK(actual == doctest::Approx(0.3311).epsilon(1e-3));
}

TEST_CASE("decay: zero elapsed is identity; past ttl is unknown") {
  FusionConfig cfg;
  cfg.decay_tau_ms[VariableName::UserPresent] = 10000.0;
  cfg.ttl_ms[VariableName::UserPresent] = 30000;
  SituationalState s;
  s.session_id = "s1";
  s.variables[VariableName::UserPresent] = StateEntry{json(true), 0.9, 5000, {"p"}};

  auto same = decay_confidence(s, 5000, cfg);
  CHECK(same.variables[VariableName::UserPresent].confidence == 0.9);

  auto stale = decay_confidence(s, 5000 + 30001, cfg);
  CHECK(stale.variables[VariableName::UserPresent].unknown());
  CHECK(stale.variables[VariableName::UserPresent].confidence == 0.0);
  // updated_at is untouched so decay stays recomputable
  CHECK(stale.variables[VariableName::UserPresent].updated_at_ms == 5000);
}

TEST_CASE("monotone decay: confidence never increases without new signals") {
  FusionConfig cfg;
  SituationalState s;
  s.session_id = "s1";
  s.variables[VariableName::Occupancy] = StateEntry{json(4), 0.8, 1000, {"o"}};
  double last = 1.0;
  for (int64_t t = 1000; t <= 1000 + 60000; t += 777) {
    double c = decay_confidence(s, t, cfg).variables[VariableName::Occupancy].confidence;
    CHECK(c <= last + 1e-15);
    last = c;
  }
}

TEST_CASE("derive_queue_state: ticket count wins; wait estimate from config") {
  FusionConfig cfg;
  cfg.per_customer_service_s = 180.0;
  Candidate ticket = cand(json{{"count", 4}}, 0.95, 1000, "tickets", "q1");
  auto entry = derive_queue_state(ticket, std::nullopt, cfg, 1000);
  CHECK(entry.value.at("count") == 4);
  CHECK(entry.value.at("wait_s") == doctest::Approx(720.0));
  CHECK(entry.confidence == doctest::Approx(0.95));
}

TEST_CASE("derive_queue_state: occupancy fallback minus staff count") {
  FusionConfig cfg;
  cfg.staff_served_count = 3;
  StateEntry occ{json(7), 0.8, 900, {"o1"}};
  auto entry = derive_queue_state(std::nullopt, occ, cfg, 1000);
  CHECK(entry.value.at("count") == 4);
  CHECK(entry.confidence == doctest::Approx(0.8));

  // never negative
  cfg.staff_served_count = 10;
  auto zero = derive_queue_state(std::nullopt, occ, cfg, 1000);
  CHECK(zero.value.at("count") == 0);
}

TEST_CASE("derive_queue_state: neither input present -> unknown") {
  FusionConfig cfg;
  auto entry = derive_queue_state(std::nullopt, std::nullopt, cfg, 1000);
  CHECK(entry.unknown());
}

TEST_CASE("derive_activity_state priority ladder") {
  auto obs = [](const std::string& channel, json payload, double score, int64_t t,
                const std::string& id) {
    return ActivityObservation{channel, std::move(payload), score, t, id};
  };
  SUBCASE("gaze at kiosk wins over everything") {
    auto e = derive_activity_state(
        {obs("gaze", json{{"target", "kiosk"}}, 0.8, 100, "g1"),
         obs("device_session", json{{"active", true}, {"kind", "personal_device"}}, 0.9, 110,
             "d1")},
        200);
    CHECK(e.value == json("engaged"));
    CHECK(e.confidence == doctest::Approx(0.8));
  }
  SUBCASE("personal device session implies on_phone") {
    auto e = derive_activity_state(
        {obs("device_session", json{{"active", true}, {"kind", "personal_device"}}, 0.7, 100,
             "d1")},
        200);
    CHECK(e.value == json("on_phone"));
  }
  SUBCASE("second speaker implies talking_to_other") {
    auto e = derive_activity_state({obs("diarization", json{{"speakers", 2}}, 0.6, 100, "s1")},
                                   200);
    CHECK(e.value == json("talking_to_other"));
  }
  SUBCASE("presence alone implies waiting") {
    auto e = derive_activity_state({obs("presence", json{{"present", true}}, 0.9, 100, "p1")},
                                   200);
    CHECK(e.value == json("waiting"));
    CHECK(e.confidence == doctest::Approx(0.9));
  }
  SUBCASE("nothing implies unknown") {
    auto e = derive_activity_state({}, 200);
    CHECK(e.unknown());
  }
}

TEST_CASE("fusion trajectories are deterministic: equal inputs, equal hashes") {
  auto run_once = [] {
    FusionConfig cfg;
    FusionState state("s1");
    std::mt19937_64 rng(2024);
    std::vector<std::string> hashes;
    for (int i = 0; i < 50; i++) {
      int64_t t = i * 200;
      auto s = signal_of("p" + std::to_string(i), "presence",
                         json{{"present", rng() % 4 != 0}},
                         double(rng() % 100) / 100.0, t, "cam-1");
      state.apply_signal(s, cfg);
      hashes.push_back(snapshot_hash(state.decayed(t, cfg)));
    }
    return hashes;
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("sensor dropout never raises confidence on consistent streams") {
  // Sources agree on values and report with scores non-decreasing in time,
  // so removing one can only remove evidence. (Conflicting streams violate
  // dropout monotonicity by construction: resolving the 0.9/0.6 disagreement
  // yields 0.6, and dropping the disagreeing source restores 0.9.)
  std::mt19937_64 rng(99);
  const std::vector<std::string> sources = {"cam-1", "ble-1", "uwb-1"};
  for (int trial = 0; trial < 20; trial++) {
    struct Ev {
      std::string source;
      int64_t t;
      double quality;
      std::string zone;
    };
    std::vector<Ev> events;
    for (int i = 0; i < 40; i++) {
      int64_t t = i * 150 + int64_t(rng() % 100);
      double quality = 0.3 + 0.017 * i;  // monotone in emission order
      events.push_back({sources[rng() % sources.size()], t, quality, "lobby"});
    }
    auto run = [&](const std::string& dropped) {
      FusionConfig cfg;
      FusionState state("s1");
      std::vector<double> confidences;
      int n = 0;
      for (const auto& ev : events) {
        if (ev.source != dropped) {
          std::string channel = ev.source == "cam-1" ? "camera_localization"
                                : ev.source == "ble-1" ? "ble_localization"
                                                       : "uwb_localization";
          state.apply_signal(signal_of("s" + std::to_string(n), channel,
                                       json{{"zone", ev.zone}}, ev.quality, ev.t, ev.source),
                             cfg);
        }
        n++;
        auto decayed = state.decayed(ev.t, cfg);
        const StateEntry* e = decayed.find(VariableName::UserPosition);
        confidences.push_back(e && !e->unknown() ? e->confidence : 0.0);
      }
      return confidences;
    };
    auto full = run("");
    for (const auto& source : sources) {
      auto without = run(source);
      for (size_t i = 0; i < full.size(); i++) CHECK(without[i] <= full[i] + 1e-12);
    }
  }
}
