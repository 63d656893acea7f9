#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ragrade {

// Machine-stable failure codes. The string form (to_string) is what the HTTP
// API reports in {"error": {"code": ...}}.
enum class ErrorCode {
  EmptyDocument,
  UnknownDocType,
  InvalidEncoding,
  IoFailure,
  EmptyText,
  InvalidEmbedding,
  RemoteUnavailable,
  DimensionMismatch,
  MissingEmbedding,
  CorruptIndex,
  WeightSumInvalid,
  BandCoverageInvalid,
  DuplicateCriterion,
  PercentOutOfRange,
  MissingCriterionScore,
  ExtraCriterionScore,
  BandPercentMismatch,
  EvidenceMismatch,
  NoJsonObject,
  SchemaViolation,
  UnknownCriterion,
  ProviderUnavailable,
  UnparseableAfterRepairs,
  InvalidSubmission,
  NotFound,
  InvalidState,
  EmptyReason,
  NoDecidedAssessments,
  LengthMismatch,
  DegenerateMarginals,
  InsufficientData,
  ZeroVariance,
  EmptyInput,
  InvalidConfig,
  InvalidInput,
  Unauthorized,
  BindFailure,
  StoreLoadFailure,
};

std::string_view to_string(ErrorCode code) noexcept;
// Inverse of to_string; unknown names map to InvalidInput.
ErrorCode parse_error_code(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// A structured-output violation: names the offending field and the reason.
class SchemaViolationError : public Error {
 public:
  SchemaViolationError(std::string field, std::string reason)
      : Error(ErrorCode::SchemaViolation, field + ": " + reason),
        field_(std::move(field)),
        reason_(std::move(reason)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string field_;
  std::string reason_;
};

}  // namespace ragrade
