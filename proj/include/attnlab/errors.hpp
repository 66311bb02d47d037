#pragma once

#include <stdexcept>
#include <string>

namespace attnlab {

// A requested construction cannot be realized with the given numeric inputs
// (e.g. datasets that violate a separation precondition, or bounds that the
// built object fails to meet on re-verification).
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// A randomized search (rejection sampling, direction search) ran out of its
// attempt budget before satisfying its acceptance test.
class BudgetExhaustedError : public std::runtime_error {
 public:
  explicit BudgetExhaustedError(const std::string& what) : std::runtime_error(what) {}
};

// Two identical inputs were assigned conflicting outputs, so no function can
// interpolate the data.
class InconsistentLabelsError : public std::runtime_error {
 public:
  explicit InconsistentLabelsError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace attnlab
