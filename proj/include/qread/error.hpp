#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qread {

enum class ErrorCode {
  EmptyTrace = 1,
  InvalidRatios,
  InsufficientData,
  FormatError,
  PayloadTruncated,
  DegenerateModel,
  FrequencyCollision,
  LengthMismatch,
  InvalidWindow,
  DegenerateClasses,
  DegenerateCentroids,
  InsufficientRelaxations,
  FeatureShapeError,
  DivergedTraining,
  AccumulatorOverflow,
  UnsupportedTruncation,
  EmptyEvaluation,
  FileNotFound,
  InvalidConfig,
  InvalidArgument,
};

std::string_view error_name(ErrorCode code) noexcept;

/// Every library failure is reported as an Error carrying a stable code.
/// The CLI maps codes to distinct process exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::InvalidRatios: return "InvalidRatios";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::PayloadTruncated: return "PayloadTruncated";
    case ErrorCode::DegenerateModel: return "DegenerateModel";
    case ErrorCode::FrequencyCollision: return "FrequencyCollision";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::DegenerateClasses: return "DegenerateClasses";
    case ErrorCode::DegenerateCentroids: return "DegenerateCentroids";
    case ErrorCode::InsufficientRelaxations: return "InsufficientRelaxations";
    case ErrorCode::FeatureShapeError: return "FeatureShapeError";
    case ErrorCode::DivergedTraining: return "DivergedTraining";
    case ErrorCode::AccumulatorOverflow: return "AccumulatorOverflow";
    case ErrorCode::UnsupportedTruncation: return "UnsupportedTruncation";
    case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace qread
