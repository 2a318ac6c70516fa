#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medcorpus/artifact.hpp"
#include "medcorpus/canonicalize.hpp"
#include "medcorpus/genclient.hpp"
#include "medcorpus/ingest.hpp"
#include "medcorpus/promptgen.hpp"

namespace medcorpus {

enum class Role { user, assistant };

struct Message {
  Role role = Role::user;
  std::string content;
  bool operator==(const Message&) const = default;
};

struct InstructionSample {
  std::string sample_id;
  std::string source_record_id;
  std::string source_dataset;
  InstructionFormat format = InstructionFormat::image_caption;
  Language language = Language::en;
  std::optional<std::string> image_ref;
  std::vector<Message> messages;
  std::optional<Verdict> quality_flag;

  bool operator==(const InstructionSample&) const = default;
  ordered_json to_json() const;
  static InstructionSample from_json(const json& j);
};

/// Empty when the sample satisfies the message-shape and image invariants.
std::optional<std::string> sample_violation(const InstructionSample& s);

/// Splits "Q: ... A: ..." text into alternating user/assistant turns.
/// Throws DialogueParse unless at least two complete pairs are found.
std::vector<Message> parse_dialogue(std::string_view text);

/// Builds the training sample for one answered request. Requires
/// finish_reason == ok and matching request ids.
InstructionSample assemble(const GenerationRequest& req, const GenerationResult& res, const CanonicalRecord& rec);

/// Chinese copy of `s` with every message translated by `translate`.
InstructionSample translated_copy(const InstructionSample& s,
                                  const std::function<std::string(std::size_t, const std::string&)>& translate);

std::string dedup_key(const InstructionSample& s);
/// Keeps the first occurrence per dedup_key, preserving order.
std::vector<InstructionSample> dedup(const std::vector<InstructionSample>& samples);

std::vector<InstructionSample> read_corpus(const std::filesystem::path& file);
void write_corpus(const std::filesystem::path& file, const std::vector<InstructionSample>& samples,
                  const ArtifactMeta& meta);

/// label -> count; merging is associative and commutative.
class CountTable {
 public:
  void add(const std::string& label, std::uint64_t n = 1) { counts_[label] += n; }
  void merge(const CountTable& other);
  std::uint64_t total() const;
  const std::map<std::string, std::uint64_t>& counts() const noexcept { return counts_; }
  /// Percents in tenths that sum to exactly 1000 (largest remainder).
  std::map<std::string, int> percent_tenths() const;
  bool operator==(const CountTable&) const = default;

 private:
  std::map<std::string, std::uint64_t> counts_;
};

struct CorpusStats {
  std::uint64_t total = 0;
  CountTable by_modality;
  CountTable by_task;
  CountTable by_department;
  CountTable by_format;
  CountTable by_language;

  void merge(const CorpusStats& other);
  bool operator==(const CorpusStats&) const = default;

  ordered_json to_json() const;
  std::string render_table() const;
  /// Horizontal bar chart of one distribution.
  static std::string render_svg(const std::string& title, const CountTable& table);
};

/// Exact distribution counts; modality, original task and department come
/// from the registered descriptor of each sample's source dataset. Samples
/// whose dataset has no department are left out of by_department.
CorpusStats compute_stats(const std::vector<InstructionSample>& corpus,
                          const std::vector<DatasetDescriptor>& registry);

}  // namespace medcorpus
