#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gdf {

/// Failure categories surfaced by the library. The CLI maps each one to a
/// distinct process exit code.
enum class ErrorCode {
  InvalidInput,
  LowDensity,
  EmptyResult,
  UnsupportedDimension,
  Numeric,
  IsolatedPoint,
  Ingestion,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid_input";
    case ErrorCode::LowDensity: return "low_density";
    case ErrorCode::EmptyResult: return "empty_result";
    case ErrorCode::UnsupportedDimension: return "unsupported_dimension";
    case ErrorCode::Numeric: return "numeric";
    case ErrorCode::IsolatedPoint: return "isolated_point";
    case ErrorCode::Ingestion: return "ingestion";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gdf
