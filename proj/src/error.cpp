#include "pdiv/error.hpp"

namespace pdiv {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kDegenerate: return "degenerate_input";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace pdiv
