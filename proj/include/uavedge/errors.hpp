#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace uavedge {

/// Malformed scenario/plan file content.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A domain invariant does not hold. `invariant()` names the first violated one.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string invariant, const std::string& detail)
      : std::runtime_error(invariant + ": " + detail), invariant_(std::move(invariant)) {}
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// Node and UAV closer than the 1 m reference distance of the channel model.
class DegenerateDistanceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No plan satisfying the constraints could be constructed.
class InfeasibleScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Convex solver gave up (phase-I infeasible, numerical breakdown, ...).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uavedge
