#include "cutoff/error.hpp"

namespace cutoff {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Parameter: return "parameter";
    case ErrorCode::Capacity: return "capacity";
    case ErrorCode::Index: return "index";
    case ErrorCode::Shape: return "shape";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Unreachable: return "unreachable";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::Coverage: return "coverage";
    case ErrorCode::Fit: return "fit";
    case ErrorCode::Audit: return "audit";
    case ErrorCode::Undefined: return "undefined";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

}  // namespace cutoff
