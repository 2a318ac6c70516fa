#include "medcorpus/types.hpp"

#include "medcorpus/error.hpp"

namespace medcorpus {
namespace {

constexpr std::array<std::string_view, kModalityCount> kModalityNames = {
    "CT",         "MR",         "X-ray",      "Pathology", "Ultrasound",
    "Fundus",     "Endoscopy",  "Dermoscopy", "Microscopy", "PET",
    "OCT",        "Infrared",   "ClinicalPhoto",
};

constexpr std::array<std::string_view, 6> kFormatNames = {
    "image_caption", "region_caption",    "free_instruction",
    "dialogue",      "visual_perception", "text_only",
};

}  // namespace

std::string to_string(const BBox& b) {
  return "[" + std::to_string(b.x_min) + ", " + std::to_string(b.y_min) + ", " +
         std::to_string(b.x_max) + ", " + std::to_string(b.y_max) + "]";
}

std::string_view to_string(TaskKind v) noexcept {
  switch (v) {
    case TaskKind::classification: return "classification";
    case TaskKind::detection: return "detection";
    case TaskKind::segmentation: return "segmentation";
  }
  return "";
}

std::string_view to_string(Modality v) noexcept {
  return kModalityNames[static_cast<std::size_t>(v)];
}

std::string_view to_string(Language v) noexcept {
  return v == Language::en ? "en" : "zh";
}

std::string_view to_string(InstructionFormat v) noexcept {
  return kFormatNames[static_cast<std::size_t>(v)];
}

std::string_view to_string(Stage v) noexcept {
  switch (v) {
    case Stage::I: return "I";
    case Stage::II: return "II";
    case Stage::III: return "III";
  }
  return "";
}

std::string_view to_string(Verdict v) noexcept {
  return v == Verdict::high ? "high" : "low";
}

TaskKind parse_task_kind(std::string_view s) {
  if (s == "classification") return TaskKind::classification;
  if (s == "detection") return TaskKind::detection;
  if (s == "segmentation") return TaskKind::segmentation;
  throw Error(ErrorCode::UnknownTaskKind, std::string(s));
}

Modality parse_modality(std::string_view s) {
  for (std::size_t i = 0; i < kModalityNames.size(); ++i) {
    if (kModalityNames[i] == s) return static_cast<Modality>(i);
  }
  throw Error(ErrorCode::UnknownModality, std::string(s));
}

Language parse_language(std::string_view s) {
  if (s == "en") return Language::en;
  if (s == "zh") return Language::zh;
  throw Error(ErrorCode::InvalidField, "language '" + std::string(s) + "'");
}

InstructionFormat parse_format(std::string_view s) {
  for (std::size_t i = 0; i < kFormatNames.size(); ++i) {
    if (kFormatNames[i] == s) return static_cast<InstructionFormat>(i);
  }
  throw Error(ErrorCode::InvalidField, "instruction format '" + std::string(s) + "'");
}

Stage parse_stage(std::string_view s) {
  if (s == "I" || s == "1") return Stage::I;
  if (s == "II" || s == "2") return Stage::II;
  if (s == "III" || s == "3") return Stage::III;
  throw Error(ErrorCode::InvalidField, "stage '" + std::string(s) + "'");
}

Verdict parse_verdict(std::string_view s) {
  if (s == "high") return Verdict::high;
  if (s == "low") return Verdict::low;
  throw Error(ErrorCode::InvalidField, "verdict '" + std::string(s) + "'");
}

std::string_view language_display_name(Language v) noexcept {
  return v == Language::en ? "English" : "Chinese";
}

}  // namespace medcorpus
