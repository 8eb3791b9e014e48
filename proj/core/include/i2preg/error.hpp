#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace i2preg {

enum class ErrorCode {
  NonPositiveDepth,
  InvalidArgument,
  DimensionMismatch,
  ShapeMismatch,
  ChannelMismatch,
  NotNormalized,
  EmptyOverlap,
  EmptySample,
  EmptyPatch,
  EmptyInput,
  EmptyCorrespondences,
  EmptyCloud,
  EmptyVisibleSet,
  InvalidRotation,
  InsufficientPoints,
  DegenerateConfiguration,
  NoConsensus,
  LengthMismatch,
  IoError,
  ParseError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on `code()`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace i2preg
