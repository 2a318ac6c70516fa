#include "medcorpus/error.hpp"

namespace medcorpus {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Io: return "IoError";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::UnknownModality: return "UnknownModality";
    case ErrorCode::UnknownTaskKind: return "UnknownTaskKind";
    case ErrorCode::DuplicateDataset: return "DuplicateDataset";
    case ErrorCode::AnnotationParse: return "AnnotationParseError";
    case ErrorCode::DanglingImageRef: return "DanglingImageRef";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::ImageDecode: return "ImageDecodeError";
    case ErrorCode::TemplateInvalid: return "TemplateInvalid";
    case ErrorCode::MissingRequiredField: return "MissingRequiredField";
    case ErrorCode::RecipeFormatMismatch: return "RecipeFormatMismatch";
    case ErrorCode::DistractorCollision: return "DistractorCollision";
    case ErrorCode::NoDistractors: return "NoDistractors";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::BackendRefusal: return "BackendRefusal";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::DialogueParse: return "DialogueParseError";
    case ErrorCode::UnknownDataset: return "UnknownDataset";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::StageOrder: return "StageOrderError";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::EndOfSubset: return "EndOfSubset";
    case ErrorCode::InsufficientReview: return "InsufficientReview";
    case ErrorCode::NoVerdict: return "NoVerdict";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

}  // namespace medcorpus
