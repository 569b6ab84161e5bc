#include "ambient/dialogue.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace ambient {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return out;
}

const std::vector<std::string> kSectionOrder = {
    "persona",  "policy_constraints", "situational_context",
    "memory",   "dialogue_history",   "user_message"};

bool is_disclosable_source(const std::string& source) {
  return source == "appointment_record" || source == "account_activity" ||
         source == "prior_conversation";
}

}  // namespace

Result<IntentTable> intent_table_from_json(const json& j) {
  using R = Result<IntentTable>;
  IntentTable t;
  if (!j.is_object() || !j.contains("intents"))
    return R::failure("intent table: missing 'intents'");
  try {
    for (const auto& rule : j.at("intents")) {
      IntentRule r;
      r.name = rule.at("name").get<std::string>();
      for (const auto& p : rule.at("patterns")) r.patterns.push_back(p.get<std::string>());
      r.confidence = rule.value("confidence", 0.9);
      for (const auto& [slot, re] : rule.value("slots", json::object()).items())
        r.slot_regex[slot] = re.get<std::string>();
      t.rules.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    return R::failure(std::string("intent table: ") + e.what());
  }
  return R::success(std::move(t));
}

IntentTable default_intent_table() {
  IntentTable t;
  auto add = [&t](std::string name, std::vector<std::string> patterns,
                  std::map<std::string, std::string> slots = {}) {
    IntentRule r;
    r.name = std::move(name);
    r.patterns = std::move(patterns);
    r.slot_regex = std::move(slots);
    t.rules.push_back(std::move(r));
  };
  add("block_card", {R"(block.*card)", R"(lost.*card)", R"(card.*(lost|stolen))"},
      {{"card_id", R"(card\s+([A-Za-z0-9-]+))"}});
  add("transfer_funds", {R"(\btransfer\b)", R"(\bsend\b.*\bfunds\b)"},
      {{"amount", R"((?:transfer|send)\s+\$?([0-9]+(?:\.[0-9]+)?))"},
       {"to_account", R"(to\s+account\s+([A-Za-z0-9-]+))"}});
  add("schedule_appointment", {R"(schedul.*appointment)", R"(book.*appointment)"});
  add("memory_query", {R"(what do you remember)", R"(remember about me)", R"(my stored data)"});
  add("request_human", {R"(\bhuman\b)", R"(speak to (a |an )?(person|advisor|someone))",
                        R"(staff member)"});
  add("loan_inquiry", {R"(\bloan\b)", R"(payment history)"});
  add("savings_inquiry", {R"(\bsavings\b)"});
  add("check_queue", {R"(\bqueue\b)", R"(wait time)", R"(how long.*wait)"});
  add("greeting", {R"(\bhello\b)", R"(\bhi\b)", R"(good (morning|afternoon|evening))"});
  return t;
}

Intent detect_intent(const std::string& text, const IntentTable& table) {
  std::string haystack = lower(text);
  for (const auto& rule : table.rules) {
    for (const auto& pattern : rule.patterns) {
      std::regex re(pattern, std::regex::icase);
      if (!std::regex_search(haystack, re)) continue;
      Intent intent;
      intent.name = rule.name;
      intent.confidence = rule.confidence;
      for (const auto& [slot, slot_pattern] : rule.slot_regex) {
        std::smatch m;
        std::regex slot_re(slot_pattern, std::regex::icase);
        if (std::regex_search(text, m, slot_re) && m.size() > 1 && m[1].matched)
          intent.slots[slot] = m[1].str();
      }
      return intent;
    }
  }
  return Intent{};  // unknown, confidence 0, empty slots
}

const PromptSection* PromptDocument::find_section(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

json PromptDocument::to_canonical() const {
  json secs = json::array();
  for (const auto& s : sections) {
    json items = json::array();
    for (const auto& i : s.items)
      items.push_back(json{{"item_id", i.item_id},
                           {"text", i.text},
                           {"source", i.source},
                           {"data", i.data}});
    secs.push_back(json{{"name", s.name}, {"items", items}});
  }
  json trace = json::object();
  for (const auto& [id, decision] : authorization_trace) trace[id] = to_json(decision);
  json slots = json::object();
  for (const auto& [k, v] : detected_intent.slots) slots[k] = v;
  return json{{"sections", secs},
              {"composed_at_ms", composed_at_ms},
              {"authorization_trace", trace},
              {"intent",
               {{"name", detected_intent.name},
                {"confidence", detected_intent.confidence},
                {"slots", slots}}}};
}

PromptDocument compose_prompt(const PromptInputs& in, const PolicyTable& table,
                              const ConsentStore& consents, TimestampMs now_ms) {
  PromptDocument doc;
  doc.composed_at_ms = now_ms;
  doc.detected_intent = in.intent;
  for (const auto& name : kSectionOrder) doc.sections.push_back({name, {}});

  auto section = [&doc](const std::string& name) -> PromptSection& {
    for (auto& s : doc.sections)
      if (s.name == name) return s;
    return doc.sections.front();
  };

  if (!in.persona.empty())
    section("persona").items.push_back({"persona", in.persona, "persona", json::object()});
  for (size_t i = 0; i < in.constraints.size(); i++)
    section("policy_constraints")
        .items.push_back(
            {"constraint-" + std::to_string(i), in.constraints[i], "policy", json::object()});

  for (const auto& candidate : in.candidates) {
    AccessRequest req;
    req.user_id = in.user_id;
    req.data_class = candidate.item.sensitivity;
    req.purpose = candidate.purpose;
    req.auth_level = in.auth_level;
    req.consent = evaluate_consent(in.user_id, candidate.purpose, consents, now_ms);
    req.now_ms = now_ms;
    PolicyDecision decision = evaluate_access(req, table);
    doc.authorization_trace[candidate.item.item_id] = decision;
    if (!decision.allowed()) continue;
    PromptItem item;
    item.item_id = candidate.item.item_id;
    item.text = candidate.item.body;
    item.source = candidate.item.source;
    item.data = candidate.data;
    item.data["pii"] = candidate.item.pii;
    std::string target =
        candidate.section == "memory" ? "memory" : "situational_context";
    section(target).items.push_back(std::move(item));
  }

  for (size_t i = 0; i < in.history.size(); i++)
    section("dialogue_history")
        .items.push_back({"turn-" + std::to_string(i + 1),
                          in.history[i].first + ": " + in.history[i].second, "history",
                          json::object()});
  section("user_message")
      .items.push_back({"user_message", in.user_message, "user", json::object()});
  return doc;
}

std::map<std::string, std::string> default_intent_ops() {
  return {{"block_card", "block_card"},
          {"transfer_funds", "transfer_funds"},
          {"schedule_appointment", "schedule_appointment"},
          {"check_queue", "queue_status"}};
}

namespace {

const PromptItem* find_item_by_source(const PromptDocument& doc, const std::string& source) {
  for (const auto& name : {"situational_context", "memory"}) {
    const PromptSection* s = doc.find_section(name);
    if (!s) continue;
    for (const auto& item : s->items)
      if (item.source == source) return &item;
  }
  return nullptr;
}

bool trace_requires_consent(const PromptDocument& doc) {
  for (const auto& [id, d] : doc.authorization_trace)
    if (d.outcome == Outcome::Require && d.required_step == RequiredStep::Consent) return true;
  return false;
}

std::string wait_sentence(const json& data) {
  if (!data.contains("wait_minutes")) return {};
  int64_t mins = data.at("wait_minutes").get<int64_t>();
  return " Your advisor will be free in approximately " + std::to_string(mins) +
         " minute" + (mins == 1 ? "" : "s") + ".";
}

}  // namespace

GeneratorOutput mock_generate(const PromptDocument& prompt) {
  GeneratorOutput out;
  const std::string& intent = prompt.detected_intent.name;
  const auto& slots = prompt.detected_intent.slots;
  const PromptItem* appointment = find_item_by_source(prompt, "appointment_record");
  const PromptItem* account = find_item_by_source(prompt, "account_activity");
  const PromptItem* memory_hit = find_item_by_source(prompt, "prior_conversation");
  const PromptItem* queue = find_item_by_source(prompt, "queue_system");
  auto intent_ops = default_intent_ops();

  if (intent == "greeting") {
    out.emotion = "warm";
    std::string name =
        appointment && appointment->data.contains("name")
            ? appointment->data.at("name").get<std::string>()
            : "";
    out.text = name.empty() ? "Hello — welcome." : "Hello " + name + ", welcome.";
    if (appointment) {
      out.text += wait_sentence(appointment->data);
      out.text += " Would you like to begin a preliminary review while you wait?";
    } else {
      out.text += " How can I help you today?";
    }
  } else if (intent == "loan_inquiry") {
    if (account) {
      out.text = "I've retrieved your loan balance and payment history.";
    } else if (trace_requires_consent(prompt)) {
      out.text =
          "To look up your loan details I need your consent to access your transaction "
          "history — shall I go ahead?";
    } else {
      out.text = "I can look into your loan details once you're authenticated.";
    }
  } else if (intent == "savings_inquiry") {
    out.text = "We have a few savings options I can walk you through.";
    if (memory_hit) out.text += " Would you like to continue where we left off?";
  } else if (intent == "block_card") {
    out.text = "I can block that card right away. Please confirm and I'll proceed.";
    json args = json::object();
    if (slots.count("card_id")) args["card_id"] = slots.at("card_id");
    out.calls.push_back({intent_ops.at("block_card"), std::move(args)});
  } else if (intent == "transfer_funds") {
    out.text = "Let me set up that transfer. Please review the details and confirm.";
    json args = json::object();
    if (slots.count("amount")) args["amount"] = std::stod(slots.at("amount"));
    if (slots.count("to_account")) args["to_account"] = slots.at("to_account");
    out.calls.push_back({intent_ops.at("transfer_funds"), std::move(args)});
  } else if (intent == "schedule_appointment") {
    out.text = "I can schedule that appointment — please confirm the details.";
    out.calls.push_back({intent_ops.at("schedule_appointment"), json::object()});
  } else if (intent == "check_queue") {
    if (queue && queue->data.contains("count")) {
      int64_t count = queue->data.at("count").get<int64_t>();
      int64_t mins = queue->data.value("wait_minutes", int64_t{0});
      out.text = "There are " + std::to_string(count) + " people in the queue; the estimated "
                 "wait is about " + std::to_string(mins) + " minutes.";
    } else {
      out.text = "Let me check the queue for you.";
    }
    out.calls.push_back({intent_ops.at("check_queue"), json::object()});
  } else if (intent == "memory_query") {
    out.text = "Here's what I have on file for you.";
  } else if (intent == "request_human") {
    out.text = "Of course — I'll bring in a colleague who can help.";
    out.emotion = "concerned";
  } else {
    out.text = "I'm sorry, I didn't quite catch that — could you rephrase?";
  }
  return out;
}

GeneratorOutput generate_reply(const PromptDocument& prompt, const Generator& generator) {
  Result<GeneratorOutput> result = generator ? generator(prompt)
                                             : Result<GeneratorOutput>::failure("no generator");
  if (result.ok()) return *result;
  GeneratorOutput fallback;
  fallback.text =
      "I'm sorry — I'm having trouble responding right now. Let me bring in a colleague to "
      "help you.";
  fallback.emotion = "concerned";
  return fallback;
}

std::vector<std::string> narrate_disclosure(const PromptDocument& prompt) {
  std::vector<std::string> out;
  for (const auto& name : {"situational_context", "memory"}) {
    const PromptSection* s = prompt.find_section(name);
    if (!s) continue;
    for (const auto& item : s->items) {
      if (!is_disclosable_source(item.source)) continue;
      std::string fragment = item.data.value("fragment", item.text);
      if (item.source == "appointment_record")
        out.push_back("I see from your appointment record that " + fragment + ".");
      else if (item.source == "prior_conversation")
        out.push_back("Last time we spoke, you mentioned " + fragment + ".");
      else if (item.source == "account_activity")
        out.push_back("Based on your recent account activity, " + fragment + ".");
    }
  }
  return out;
}

std::string proactive_utterance(TriggerKind kind, const json& params, InitiativeLevel level) {
  if (level == InitiativeLevel::Silent) return {};
  switch (kind) {
    case TriggerKind::TemporalSilence:
      return "It seems like you might have a question — would you like me to help?";
    case TriggerKind::BehavioralCue:
      if (level == InitiativeLevel::Hint) return "I'm here if you need anything while you wait.";
      return "It looks like you may be waiting for a consultation — would you like me to "
             "check on the status?";
    case TriggerKind::SituationalEvent: {
      std::string event = params.value("event", "");
      if (event == "appointment_soon") {
        int64_t mins = params.value("remaining_minutes", int64_t{5});
        std::string text = "Your advisor will be available in about " + std::to_string(mins) +
                           " minute" + (mins == 1 ? "" : "s") + ".";
        if (level >= InitiativeLevel::Suggest)
          text += " Would you like a preliminary review while you wait?";
        return text;
      }
      if (event == "queue_position")
        return "You're almost up — I can get your documents ready if you like.";
      return "There's an update on your visit — would you like the details?";
    }
  }
  return {};
}

}  // namespace ambient
