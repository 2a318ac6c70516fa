#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace medcorpus {

/// Inclusive pixel box, origin top-left.
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  long long width() const noexcept { return static_cast<long long>(x_max) - x_min + 1; }
  long long height() const noexcept { return static_cast<long long>(y_max) - y_min + 1; }
  long long area() const noexcept { return width() * height(); }
  bool well_ordered() const noexcept { return x_min <= x_max && y_min <= y_max; }
  bool operator==(const BBox&) const = default;
};

std::string to_string(const BBox& b);

enum class TaskKind { classification, detection, segmentation };

enum class Modality {
  CT,
  MR,
  XRay,
  Pathology,
  Ultrasound,
  Fundus,
  Endoscopy,
  Dermoscopy,
  Microscopy,
  PET,
  OCT,
  Infrared,
  ClinicalPhoto,
};

inline constexpr std::size_t kModalityCount = 13;

enum class Language { en, zh };

// Declaration order is the emission order for planned requests.
enum class InstructionFormat {
  image_caption,
  region_caption,
  free_instruction,
  dialogue,
  visual_perception,
  text_only,
};

inline constexpr std::array<InstructionFormat, 6> kAllFormats = {
    InstructionFormat::image_caption,    InstructionFormat::region_caption,
    InstructionFormat::free_instruction, InstructionFormat::dialogue,
    InstructionFormat::visual_perception, InstructionFormat::text_only,
};

enum class Stage { I, II, III };

enum class Verdict { high, low };

std::string_view to_string(TaskKind v) noexcept;
std::string_view to_string(Modality v) noexcept;
std::string_view to_string(Language v) noexcept;
std::string_view to_string(InstructionFormat v) noexcept;
std::string_view to_string(Stage v) noexcept;
std::string_view to_string(Verdict v) noexcept;

// Parsers throw Error with the matching Unknown* / InvalidField code.
TaskKind parse_task_kind(std::string_view s);
Modality parse_modality(std::string_view s);
Language parse_language(std::string_view s);
InstructionFormat parse_format(std::string_view s);
Stage parse_stage(std::string_view s);
Verdict parse_verdict(std::string_view s);

std::string_view language_display_name(Language v) noexcept;

}  // namespace medcorpus
