#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "medcorpus/artifact.hpp"
#include "medcorpus/canonicalize.hpp"
#include "medcorpus/types.hpp"

namespace medcorpus {

/// Placeholders a template body may use.
inline constexpr std::array<std::string_view, 5> kPlaceholders = {"modality", "label", "department", "bbox",
                                                                  "language"};

/// Prompt template loaded from a text file:
///
///   format: region_caption
///   required: modality, label, bbox, language
///   ---
///   Describe the {label} region at {bbox} in this {modality} image[[ from {department}]].
///
/// Text inside [[...]] is an optional clause, dropped whole when any of its
/// placeholders has no value.
struct PromptTemplate {
  std::string template_id;
  InstructionFormat format = InstructionFormat::image_caption;
  std::string body;
  std::set<std::string> required_fields;
  std::set<std::string> optional_fields;
};

PromptTemplate parse_template(const std::string& template_id, std::string_view text);
/// Every `*.txt` in `dir`; the template id is the file stem.
std::map<std::string, PromptTemplate> load_templates(const std::filesystem::path& dir);

/// Substitutes `values` into `body`; optional clauses with a missing value
/// are removed. Required placeholders without a value throw
/// MissingRequiredField.
std::string render_template(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values);

struct MultipleChoice {
  std::string question;
  std::vector<std::string> options;
  std::size_t answer_index = 0;

  bool operator==(const MultipleChoice&) const = default;
  std::string render() const;  // question followed by lettered options
  ordered_json to_json() const;
  static MultipleChoice from_json(const json& j);
};

struct GenerationRequest {
  std::string request_id;
  std::string record_id;
  InstructionFormat format = InstructionFormat::image_caption;
  std::string prompt_text;
  std::optional<std::string> image_ref;
  Language target_language = Language::en;
  // Carried for backends and assembly; not part of the prompt contract.
  std::string template_id;
  std::string label;
  std::string source_dataset;
  int sequence = 0;
  std::optional<MultipleChoice> mcq;

  ordered_json to_json() const;
  static GenerationRequest from_json(const json& j);
};

/// Deterministic in (record_id, template_id, lang, sequence).
std::string request_id_for(const std::string& record_id, const std::string& template_id, Language lang,
                           int sequence);

GenerationRequest build_request(const CanonicalRecord& rec, const PromptTemplate& tmpl, Language lang,
                                int sequence = 0);

/// Options are the first min(4, |distractors|) distractors plus the true
/// label, shuffled by `seed`.
MultipleChoice build_vp_question(const CanonicalRecord& rec, const std::vector<std::string>& distractors,
                                 std::uint64_t seed);

struct RecipeEntry {
  std::string template_id;
  int count = 1;
};

/// Enabled instruction formats with their template and per-record count.
struct FormatRecipe {
  std::map<InstructionFormat, RecipeEntry> entries;

  static FormatRecipe from_json(const json& j);
  ordered_json to_json() const;
};

/// Label vocabulary used to draw visual-perception distractors: labels of
/// the same dataset first, then the same modality, then everything.
class LabelVocabulary {
 public:
  void add(const CanonicalRecord& rec);
  std::vector<std::string> candidates(const CanonicalRecord& rec) const;

 private:
  std::map<std::string, std::set<std::string>> by_dataset_;
  std::map<Modality, std::set<std::string>> by_modality_;
  std::set<std::string> all_;
};

struct PlanContext {
  const std::map<std::string, PromptTemplate>* templates = nullptr;
  const LabelVocabulary* vocabulary = nullptr;
  std::uint64_t seed = 0;
  Language language = Language::en;
};

/// Formats the recipe enables for a record of this kind, in emission order.
std::vector<InstructionFormat> formats_for(TaskKind kind, const FormatRecipe& recipe);

std::vector<GenerationRequest> plan_requests(const CanonicalRecord& rec, const FormatRecipe& recipe,
                                             const PlanContext& ctx);

}  // namespace medcorpus
