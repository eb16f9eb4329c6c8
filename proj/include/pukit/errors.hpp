#pragma once

#include <stdexcept>
#include <string>

namespace pukit {

// Failure taxonomy shared by the whole toolkit. The CLI maps kinds onto
// exit codes: check failures exit 1, configuration/input problems exit 2.
enum class ErrorKind {
  Shape,        // operand shapes do not conform
  Contract,     // API precondition violated
  Provenance,   // tensor was not produced by the tape it is used with
  Numeric,      // non-finite value produced by a forward pass
  Degenerate,   // degenerate input (zero-norm slice, no labeled positives)
  Composition,  // batch composition unusable (a label kind is missing)
  Config,       // invalid configuration value
  Parse,        // malformed file content
  Schema,       // file does not match the declared schema
  Label,        // required labels missing from a dataset
  Training,     // training diverged or produced bad gradients
  Integrity,    // corrupted or truncated artifact
  Version,      // unsupported artifact version
  Kind,         // artifact of the wrong component kind
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace pukit
