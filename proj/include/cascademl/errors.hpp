#pragma once

#include <stdexcept>
#include <string>

namespace cml {

// Error categories, aligned with the process exit codes used by the CLI:
// check failures are reported via return values, invalid_argument/parse/state
// map to exit 2, numeric divergence maps to exit 3.
enum class ErrorKind {
  invalid_argument,  // bad shapes, bad config, violated preconditions
  parse,             // malformed files or JSON
  state,             // operation not legal in the current object state
  numeric,           // non-finite values, divergence
  io                 // filesystem failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cml
