#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ambient/engine.hpp"

namespace fs = std::filesystem;
using namespace ambient;

namespace {

std::string config_dir_from_env(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  const char* env = std::getenv("SIM_CONFIG_DIR");
  if (env && *env) return env;
  if (fs::exists("configs")) return "configs";
  return {};
}

int run_command(const std::string& scenario_path, uint64_t seed, bool seed_set,
                const std::string& report_path, const std::string& audit_path,
                const std::string& format, const std::string& config_dir) {
  auto scenario = load_scenario(scenario_path);
  if (!scenario.ok()) {
    std::cerr << "error: " << scenario.error << "\n";
    return 2;
  }
  auto config = load_engine_config(config_dir_from_env(config_dir));
  if (!config.ok()) {
    std::cerr << "error: " << config.error << "\n";
    return 2;
  }
  auto report = run_scenario(*scenario, *config,
                             seed_set ? std::optional<uint64_t>(seed) : std::nullopt);
  if (!report.ok()) {
    std::cerr << "error: " << report.error << "\n";
    return 2;
  }

  std::string rendered = emit_report(*report, format);
  if (report_path.empty()) {
    std::cout << rendered;
    if (format == "json") std::cout << "\n";
  } else {
    std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
    out << emit_report(*report, "json");
    std::cout << report->to_text();
  }
  if (!audit_path.empty()) {
    std::ofstream out(audit_path, std::ios::binary | std::ios::trunc);
    out << report->audit_jsonl;
  }
  return report->all_assertions_pass() ? 0 : 1;
}

int validate_command(const std::string& scenario_path) {
  std::ifstream f(scenario_path);
  if (!f) {
    std::cerr << "error: cannot open " << scenario_path << "\n";
    return 2;
  }
  json parsed = json::parse(f, nullptr, false);
  if (parsed.is_discarded()) {
    std::cerr << "error: scenario parse error\n";
    return 2;
  }
  auto problems = lint_scenario(parsed);
  if (problems.empty()) {
    auto s = scenario_from_json(parsed);
    std::cout << "ok: " << s->scenario_id << " (" << s->events.size() << " events, "
              << s->assertions.size() << " assertions)\n";
    return 0;
  }
  for (const auto& p : problems) std::cout << "problem: " << p << "\n";
  return 1;
}

int audit_verify_command(const std::string& path) {
  auto v = AuditLog::verify_file(path);
  if (v.ok) {
    std::cout << "ok: audit chain verifies\n";
    return 0;
  }
  std::cout << "FAIL at seq " << v.failed_seq << ": " << v.reason << "\n";
  return 1;
}

int policy_lint_command(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    std::cerr << "error: cannot open " << path << "\n";
    return 2;
  }
  json parsed = json::parse(f, nullptr, false);
  if (parsed.is_discarded()) {
    std::cout << "problem: file is not valid JSON\n";
    return 1;
  }
  auto problems = lint_policy_table(parsed);
  if (problems.empty()) {
    std::cout << "ok: policy table valid\n";
    return 0;
  }
  for (const auto& p : problems) std::cout << "problem: " << p << "\n";
  return 1;
}

int memory_command(const std::string& action, const std::string& store_path,
                   const std::string& user, const std::string& entry_id,
                   const std::string& body) {
  MemoryStore store;
  if (fs::exists(store_path)) {
    auto loaded = MemoryStore::load(store_path);
    if (!loaded.ok()) {
      std::cerr << "error: " << loaded.error << "\n";
      return 2;
    }
    store = std::move(*loaded);
  }
  json request{{"action", action}};
  if (!entry_id.empty()) request["entry_id"] = entry_id;
  if (!body.empty()) request["body"] = body;
  auto outcome = user_memory_request(user, request, store, 0);
  if (!outcome.ok()) {
    std::cerr << "error: " << outcome.error << "\n";
    return 1;
  }
  if (action == "list") {
    for (const auto& e : outcome.listed) std::cout << canonical_dump(to_json(e)) << "\n";
  } else {
    store.save(store_path);
    std::cout << "ok\n";
  }
  return 0;
}

// Live mode: newline-delimited scenario events over a unix socket, one
// response line per event. Same engine as file mode.
int serve_command(const std::string& socket_path, const std::string& bootstrap,
                  const std::string& config_dir) {
  auto config = load_engine_config(config_dir_from_env(config_dir));
  if (!config.ok()) {
    std::cerr << "error: " << config.error << "\n";
    return 2;
  }
  Scenario scenario;
  if (!bootstrap.empty()) {
    auto loaded = load_scenario(bootstrap);
    if (!loaded.ok()) {
      std::cerr << "error: " << loaded.error << "\n";
      return 2;
    }
    scenario = *loaded;
    auto applied = apply_config_overrides(*config, scenario.config);
    if (!applied.ok()) {
      std::cerr << "error: " << applied.error << "\n";
      return 2;
    }
    for (const auto& reg_json : scenario.registrations) {
      auto reg = registration_from_json(reg_json);
      if (reg.ok()) config->sources[reg->source_id] = *reg;
    }
  }

  Engine engine(*config, scenario.seed, scenario.fixtures);
  for (const auto& surface_json : scenario.surfaces) {
    auto surface = surface_from_json(surface_json);
    if (surface.ok()) engine.add_surface(*surface);
  }
  engine.seed_consents(scenario.consents);
  engine.start_session(scenario.session, 0);

  ::unlink(socket_path.c_str());
  int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (fd < 0) {
    std::cerr << "error: socket() failed\n";
    return 2;
  }
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  std::snprintf(addr.sun_path, sizeof(addr.sun_path), "%s", socket_path.c_str());
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(fd, 1) < 0) {
    std::cerr << "error: bind/listen failed on " << socket_path << "\n";
    ::close(fd);
    return 2;
  }
  std::cout << "listening on " << socket_path << "\n" << std::flush;

  int client = ::accept(fd, nullptr, nullptr);
  if (client < 0) {
    ::close(fd);
    return 2;
  }
  std::string buffer;
  char chunk[4096];
  size_t turns_reported = 0;
  ssize_t n;
  while ((n = ::read(client, chunk, sizeof(chunk))) > 0) {
    buffer.append(chunk, size_t(n));
    size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (line.empty()) continue;
      json ev_json = json::parse(line, nullptr, false);
      std::string response;
      if (ev_json.is_discarded() || !ev_json.is_object()) {
        response = canonical_dump(json{{"error", "unparseable event"}});
      } else {
        ScenarioEvent ev;
        ev.at_ms = ev_json.value("at_ms", int64_t{0});
        ev.kind = ev_json.value("kind", "tick");
        ev.fields = ev_json;
        ev.fields.erase("at_ms");
        ev.fields.erase("kind");
        engine.process_event(ev);
        json turns = json::array();
        Session* s = engine.session();
        if (s) {
          for (size_t i = turns_reported; i < s->transcript.turns.size(); i++)
            turns.push_back(to_json(s->transcript.turns[i]));
          turns_reported = s->transcript.turns.size();
        }
        response = canonical_dump(json{{"at_ms", ev.at_ms}, {"turns", turns}});
      }
      response += "\n";
      if (::write(client, response.data(), response.size()) < 0) break;
    }
  }
  ::close(client);
  ::close(fd);
  ::unlink(socket_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ambient-context orchestration simulator"};
  app.require_subcommand(1);
  std::string config_dir;
  app.add_option("--config-dir", config_dir, "config root (overrides SIM_CONFIG_DIR)");

  // sim run
  auto* run = app.add_subcommand("run", "run a scenario and check its assertions");
  std::string scenario_path, report_path, audit_path, format = "text";
  uint64_t seed = 0;
  run->add_option("scenario", scenario_path, "scenario file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "seed override");
  run->add_option("--report", report_path, "write canonical JSON report here");
  run->add_option("--audit", audit_path, "write the audit JSONL here");
  run->add_option("--format", format, "stdout format: text|json")
      ->check(CLI::IsMember({"text", "json"}));

  // sim validate
  auto* validate = app.add_subcommand("validate", "validate a scenario file");
  std::string validate_path;
  validate->add_option("scenario", validate_path, "scenario file")->required();

  // audit verify
  auto* audit = app.add_subcommand("audit", "audit log tools");
  auto* audit_verify = audit->add_subcommand("verify", "verify an audit chain");
  std::string audit_file;
  audit_verify->add_option("file", audit_file, "audit JSONL file")->required();

  // policy lint
  auto* policy = app.add_subcommand("policy", "policy table tools");
  auto* policy_lint = policy->add_subcommand("lint", "lint a policy table");
  std::string policy_file;
  policy_lint->add_option("table", policy_file, "policy table JSON file")->required();

  // memory list|delete|correct
  auto* memory = app.add_subcommand("memory", "long-term memory store tools");
  std::string mem_store = "memory.jsonl", mem_user, mem_entry, mem_body;
  memory->add_option("--store", mem_store, "memory store JSONL file");
  memory->add_option("--user", mem_user, "user id")->required();
  auto* mem_list = memory->add_subcommand("list", "list a user's entries");
  auto* mem_delete = memory->add_subcommand("delete", "delete an entry");
  mem_delete->add_option("entry_id", mem_entry, "entry id")->required();
  auto* mem_correct = memory->add_subcommand("correct", "replace an entry body");
  mem_correct->add_option("entry_id", mem_entry, "entry id")->required();
  mem_correct->add_option("body", mem_body, "new body")->required();

  // sim serve
  auto* serve = app.add_subcommand("serve", "accept JSONL events on a local socket");
  std::string socket_path, bootstrap;
  serve->add_option("--socket", socket_path, "unix socket path")->required();
  serve->add_option("--bootstrap", bootstrap, "scenario file for fixtures/surfaces");

  CLI11_PARSE(app, argc, argv);

  if (*run)
    return run_command(scenario_path, seed, seed_opt->count() > 0, report_path, audit_path,
                       format, config_dir);
  if (*validate) return validate_command(validate_path);
  if (*audit_verify) return audit_verify_command(audit_file);
  if (*policy_lint) return policy_lint_command(policy_file);
  if (*mem_list) return memory_command("list", mem_store, mem_user, "", "");
  if (*mem_delete) return memory_command("delete", mem_store, mem_user, mem_entry, "");
  if (*mem_correct) return memory_command("correct", mem_store, mem_user, mem_entry, mem_body);
  if (*serve) return serve_command(socket_path, bootstrap, config_dir);
  return 2;
}
