#pragma once

#include <stdexcept>
#include <string>

namespace vf {

enum class ErrorKind {
  Config,        // invalid configuration or CLI arguments
  Data,          // malformed / inconsistent input files or matrices
  Checksum,      // checkpoint CRC mismatch
  Version,       // unsupported file format version
  Truncated,     // file ended before its declared payload
  Architecture,  // checkpoint architecture does not match the requested model
  Numeric,       // non-finite values where finite ones are required
  Dimension,     // tensor shape mismatch
  Protocol,      // API misuse such as stepping a finished episode
  Io,            // filesystem failures
};

const char* to_string(ErrorKind kind);

// Process exit code for a failure of the given kind:
// 0 success, 2 config, 3 data, 4 architecture mismatch, 5 numeric, 1 anything else.
int exit_code(ErrorKind kind);

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

}  // namespace vf
