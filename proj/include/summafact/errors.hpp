#pragma once

#include <stdexcept>
#include <string>

namespace summafact {

enum class ErrorKind {
  io,
  validation,
  precondition,
  configuration,
  transport,
  backend,
  unscripted,
  parse,
  generation,
  computation,
  metric_unavailable,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the whole pipeline; `kind` tells callers
/// which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace summafact
