#pragma once

#include <stdexcept>
#include <string>

namespace humt {

enum class ErrorCode {
  invalid_argument = 1,
  unsupported_capability,
  protocol,
  transport,
  io,
  ingest,
  scoring,
  degenerate,
  pool_too_small,
  not_found,
};

const char* error_code_name(ErrorCode code) noexcept;

/// Base of every error thrown by the library. The code maps 1:1 onto the C API
/// status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline Error invalid_argument(const std::string& what) {
  return Error(ErrorCode::invalid_argument, what);
}

}  // namespace humt
