#include "humt/error.hpp"

namespace humt {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::unsupported_capability: return "unsupported_capability";
    case ErrorCode::protocol: return "protocol";
    case ErrorCode::transport: return "transport";
    case ErrorCode::io: return "io";
    case ErrorCode::ingest: return "ingest";
    case ErrorCode::scoring: return "scoring";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::pool_too_small: return "pool_too_small";
    case ErrorCode::not_found: return "not_found";
  }
  return "unknown";
}

}  // namespace humt
