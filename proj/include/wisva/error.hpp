#pragma once

#include <stdexcept>
#include <string>

namespace wisva {

enum class ErrorCode {
  PlacementExhausted,
  EmptySweep,
  InvalidScene,
  InvalidResolution,
  DegenerateRange,
  ShapeMismatch,
  NonFiniteLoss,
  EmptySplit,
  InsufficientSamples,
  BadMagic,
  TruncatedFile,
  ManifestMismatch,
  KindMismatch,
  UnknownTensor,
  InvalidConfig,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PlacementExhausted: return "PlacementExhausted";
    case ErrorCode::EmptySweep: return "EmptySweep";
    case ErrorCode::InvalidScene: return "InvalidScene";
    case ErrorCode::InvalidResolution: return "InvalidResolution";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::UnknownTensor: return "UnknownTensor";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Errors caused by numerics rather than by what the caller passed in.
  bool is_internal() const noexcept { return code_ == ErrorCode::NonFiniteLoss; }

 private:
  ErrorCode code_;
};

}  // namespace wisva
