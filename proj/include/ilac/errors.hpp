#pragma once

#include <stdexcept>
#include <string>

namespace ilac {

// Shapes disagree with what an operation or weight set expects.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside an operation's mathematical domain (empty softmax, all-zero counts, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Caller broke an API contract (non-scalar loss, non-deterministic objective, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf or divergence detected.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid generator or run configuration.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or missing user input (files, corpora, flags).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint / corpus format or configuration mismatch.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SceneTooSmallError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ilac
