#pragma once

#include <stdexcept>
#include <string>

namespace extmil {

/// Thrown when a caller breaks a documented precondition (bad index,
/// dimension mismatch, value outside its domain).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a well-formed request cannot be completed (noise budget
/// exhausted, every path invalid, unreadable cache file, ...).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace extmil
