#pragma once
#include <string>
#include <vector>

#include "ambient/context.hpp"

namespace ambient {

// Scripted enterprise providers: appointments, CRM, queue, staff roster,
// risk. Lookups are deterministic reads of the scenario fixtures; every call
// is logged so tests can assert that the policy gate (not the stub) is what
// keeps data out of reach.
class EnterpriseStubs {
 public:
  explicit EnterpriseStubs(json fixtures = json::object());

  struct Response {
    bool found = false;
    json record;
  };

  // kind: appointments | crm | queue | staff_roster | risk
  Response query(const std::string& kind, const std::string& key);

  const std::vector<std::string>& call_log() const { return call_log_; }
  const json& fixtures() const { return fixtures_; }

 private:
  json fixtures_;
  std::vector<std::string> call_log_;
};

}  // namespace ambient
