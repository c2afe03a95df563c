#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace inca {

enum class ErrorCode {
  UnknownEntity,
  LengthMismatch,
  NonMonotoneTimestamps,
  NonUniformTimestamps,
  InvalidTopology,
  TooShort,
  LagTooLarge,
  NonFinite,
  ShapeMismatch,
  NonFiniteLoss,
  DidNotConverge,
  EmptyGraph,
  NoConvergence,
  DegenerateSample,
  InvalidCounts,
  EmptyTruth,
  InvalidArgument,
  Parse,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace inca
