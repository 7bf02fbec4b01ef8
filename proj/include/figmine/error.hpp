#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace figmine {

enum class ErrorCode {
  DecodeError,
  UnsupportedFormat,
  InvalidImage,
  InvalidParameter,
  InsufficientData,
  InvalidTrainingSet,
  InvalidFeature,
  InvalidRegion,
  ParseError,
  EmptyGraph,
  EmptyInput,
  InsufficientBins,
  InvalidConfusionMatrix,
  UndefinedError,
  EmptyQuery,
  NotFound,
  BadRequest,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidTrainingSet: return "InvalidTrainingSet";
    case ErrorCode::InvalidFeature: return "InvalidFeature";
    case ErrorCode::InvalidRegion: return "InvalidRegion";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InsufficientBins: return "InsufficientBins";
    case ErrorCode::InvalidConfusionMatrix: return "InvalidConfusionMatrix";
    case ErrorCode::UndefinedError: return "UndefinedError";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI, the HTTP layer) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace figmine
