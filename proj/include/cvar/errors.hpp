#pragma once

#include <stdexcept>
#include <string>

namespace cvar {

// Malformed arguments: empty distributions, out-of-range levels, bad shapes.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values produced during evaluation (e.g. softmax overflow).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Environment misbehaviour during a rollout (non-finite cost, bad outcome table).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Calling an operation outside its contract, e.g. stepping a terminal state.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linear solve failure; carries the estimated condition number of the system.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double condition_estimate)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

}  // namespace cvar
