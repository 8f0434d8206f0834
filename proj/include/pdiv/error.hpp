#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pdiv {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNotFound,
  kParse,
  kDegenerate,
  kConflict,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library. The code is stable and is what the
/// CLI and HTTP service report to callers.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace pdiv
