#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qaction {

/// Failure categories raised across the library. The CLI maps these onto its
/// machine-readable error document, so the names are part of the interface.
enum class ErrorCode {
  InvalidArgument,
  NonPositiveTime,
  Unbounded,
  OffGrid,
  GridTooCoarse,
  NegativeKernel,
  Underflow,
  EmptyTable,
  NotConverged,
  ConjugatePoint,
  NoConvergence,
  PathFailure,
  NoDoubleWell,
  MissingEntry,
  EmptyShell,
  Overflow,
  TooFewCrossings,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace qaction
