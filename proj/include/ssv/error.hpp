#pragma once

#include <stdexcept>
#include <string>

namespace ssv {

/// A configuration or domain value violates its invariant. `field()` names
/// the offending field.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// decide / feedback / advance called out of order.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A precondition of an operation was not met (wrong variant, stream not
/// exhausted, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Simulation bookkeeping disagrees with itself, e.g. an observed label that
/// differs from the latent one.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input document (config, trace, CSV).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ssv
