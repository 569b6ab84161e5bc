#include "ambient/stubs.hpp"

namespace ambient {

EnterpriseStubs::EnterpriseStubs(json fixtures) : fixtures_(std::move(fixtures)) {
  if (!fixtures_.is_object()) fixtures_ = json::object();
}

EnterpriseStubs::Response EnterpriseStubs::query(const std::string& kind,
                                                 const std::string& key) {
  call_log_.push_back(kind + ":" + key);
  Response r;
  if (!fixtures_.contains(kind)) return r;
  const json& table = fixtures_.at(kind);
  if (table.is_object()) {
    if (key.empty()) {
      r.found = true;
      r.record = table;
      return r;
    }
    if (table.contains(key)) {
      r.found = true;
      r.record = table.at(key);
    }
    return r;
  }
  if (table.is_array() && key.empty()) {
    r.found = true;
    r.record = table;
  }
  return r;
}

}  // namespace ambient
