#include "attnlab/report.hpp"

namespace attnlab {

bool RunReport::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

nlohmann::ordered_json check_to_json(const CheckResult& c) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["passed"] = c.passed;
  j["measured"] = c.measured;
  j["bound"] = c.bound;
  j["comparison"] = c.comparison;
  j["scale"] = c.scale;
  j["bound_ref"] = c.bound_ref;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

nlohmann::ordered_json RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& c : checks) arr.push_back(check_to_json(c));
  j["checks"] = std::move(arr);
  j["all_passed"] = all_passed();
  j["wall_ms"] = wall_ms;
  return j;
}

}  // namespace attnlab
