#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace acfkit {

enum class ErrorCode {
  // configuration / argument errors
  ConfigError,
  InvalidArgument,
  UnstableCoupling,
  TooManySegments,
  // data errors
  ConstantChannel,
  NonFinite,
  TooShort,
  NegativeScore,
  MismatchedChannels,
  DelayTooLarge,
  LengthMismatch,
  ShapeMismatch,
  SingleClassDataset,
  EmptyVote,
  Empty,
  MissingClass,
  SingleClass,
  MissingSplit,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Process exit code used by the CLI: 2 for configuration problems, 3 for data problems.
int exit_code_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace acfkit
