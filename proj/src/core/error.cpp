#include "vf/core/error.hpp"

namespace vf {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::Checksum: return "checksum";
    case ErrorKind::Version: return "version";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::Architecture: return "architecture";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data:
    case ErrorKind::Checksum:
    case ErrorKind::Version:
    case ErrorKind::Truncated:
    case ErrorKind::Dimension: return 3;
    case ErrorKind::Architecture: return 4;
    case ErrorKind::Numeric: return 5;
    default: return 1;
  }
}

}  // namespace vf
