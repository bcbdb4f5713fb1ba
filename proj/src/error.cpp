#include "acfkit/error.hpp"

namespace acfkit {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnstableCoupling: return "UnstableCoupling";
    case ErrorCode::TooManySegments: return "TooManySegments";
    case ErrorCode::ConstantChannel: return "ConstantChannel";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::NegativeScore: return "NegativeScore";
    case ErrorCode::MismatchedChannels: return "MismatchedChannels";
    case ErrorCode::DelayTooLarge: return "DelayTooLarge";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::EmptyVote: return "EmptyVote";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::MissingSplit: return "MissingSplit";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnstableCoupling:
    case ErrorCode::TooManySegments:
      return 2;
    default:
      return 3;
  }
}

}  // namespace acfkit
