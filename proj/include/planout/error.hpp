#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace planout {

enum class ErrorCode {
  ParseError,
  SchemaError,
  InvalidScript,
  MissingInput,
  IndexOutOfRange,
  TypeMismatch,
  DivisionByZero,
  Overflow,
  EmptyUnit,
  InvalidUnit,
  InvalidSalt,
  EmptyChoices,
  LengthMismatch,
  ZeroTotalWeight,
  ProbabilityOutOfRange,
  InvertedRange,
  DrawsExceedChoices,
  DuplicateNamespace,
  UnknownNamespace,
  DuplicateExperiment,
  UnknownExperiment,
  InsufficientSegments,
  InvalidArgument,
  VersionConflict,
  StoreCorrupt,
  MalformedOverride,
  UnknownParameter,
  ExpectedTooSmall,
  SinkUnavailable,
  MalformedRecord,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure raised by the library. `offset` is set for errors that can
/// be attributed to a byte position in some input text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> offset = std::nullopt)
      : std::runtime_error(message), code_(code), offset_(offset) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> offset_;
};

}  // namespace planout
