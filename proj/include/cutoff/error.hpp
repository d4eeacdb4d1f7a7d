#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cutoff {

enum class ErrorCode {
  Parameter = 1,
  Capacity,
  Index,
  Shape,
  Unsupported,
  Unreachable,
  Timeout,
  Coverage,
  Fit,
  Audit,
  Undefined,
  Io,
};

const char* error_code_name(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// C boundary can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Step budget exhausted before the event of interest happened.
class TimeoutError : public Error {
 public:
  TimeoutError(const std::string& what, std::size_t completed)
      : Error(ErrorCode::Timeout, what), completed_(completed) {}
  std::size_t completed() const noexcept { return completed_; }

 private:
  std::size_t completed_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace cutoff
