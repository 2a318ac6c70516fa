#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medcorpus {

enum class ErrorCode {
  Io,
  MissingField,
  InvalidField,
  UnknownField,
  UnknownModality,
  UnknownTaskKind,
  DuplicateDataset,
  AnnotationParse,
  DanglingImageRef,
  EmptyMask,
  ImageDecode,
  TemplateInvalid,
  MissingRequiredField,
  RecipeFormatMismatch,
  DistractorCollision,
  NoDistractors,
  RateLimited,
  BackendRefusal,
  BackendUnavailable,
  Timeout,
  MalformedResponse,
  Config,
  DialogueParse,
  UnknownDataset,
  InsufficientSamples,
  StageOrder,
  EmptyManifest,
  EndOfSubset,
  InsufficientReview,
  NoVerdict,
  InvalidArgument,
  SchemaViolation,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// All fatal failures in the library surface as this exception; `code()`
/// identifies the condition, `what()` is "<CodeName>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace medcorpus
