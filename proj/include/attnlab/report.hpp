#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace attnlab {

// One verified inequality: measured against bound, with a stable identifier
// for which bound it is. scale says how to read the two numbers ("linear" or
// "log").
struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string comparison;  // e.g. "measured > bound"
  std::string bound_ref;   // semantic id of the bound, e.g. "boltzmann-separation-bound"
  std::string scale = "linear";
  std::string note;
};

struct RunReport {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;
  std::vector<CheckResult> checks;
  double wall_ms = 0.0;

  bool all_passed() const;
  nlohmann::ordered_json to_json() const;
};

nlohmann::ordered_json check_to_json(const CheckResult& c);

}  // namespace attnlab
