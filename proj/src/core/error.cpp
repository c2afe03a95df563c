#include "inca/core/error.hpp"

namespace inca {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonMonotoneTimestamps: return "NonMonotoneTimestamps";
    case ErrorCode::NonUniformTimestamps: return "NonUniformTimestamps";
    case ErrorCode::InvalidTopology: return "InvalidTopology";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::LagTooLarge: return "LagTooLarge";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DidNotConverge: return "DidNotConverge";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::InvalidCounts: return "InvalidCounts";
    case ErrorCode::EmptyTruth: return "EmptyTruth";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace inca
