#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "medcorpus/artifact.hpp"
#include "medcorpus/canonicalize.hpp"
#include "medcorpus/corpus.hpp"
#include "medcorpus/types.hpp"

namespace medcorpus {

struct ReviewPolicy {
  int min_samples_seen = 20;
  std::size_t subset_size = 100;
  double diversity_fraction = 0.05;
  double diversity_pool_rate = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
  static ReviewPolicy from_json(const json& j, std::uint64_t seed);
  ordered_json to_json() const;
};

struct QualityLabel {
  std::string dataset_name;
  std::string reviewer;
  Verdict verdict = Verdict::low;
  std::vector<std::string> sample_ids_seen;
  std::string timestamp;  // ISO-8601 UTC, e.g. 2026-01-31T12:00:00Z
  std::string notes;

  ordered_json to_json() const;
  static QualityLabel from_json(const json& j);
};

struct RetentionDecision {
  std::string dataset_name;
  bool retained = false;
  double retained_fraction = 0.0;

  bool operator==(const RetentionDecision&) const = default;
  ordered_json to_json() const;
  static RetentionDecision from_json(const json& j);
};

/// Majority across reviewers; a tie (including 0-0) is low.
Verdict aggregate_verdict(const std::vector<Verdict>& verdicts);

/// Whether a low-quality dataset is kept for diversity (seeded draw).
bool in_diversity_pool(const std::string& dataset, const ReviewPolicy& policy);

/// Retention for an aggregate verdict under `policy`.
RetentionDecision decide_retention(const std::string& dataset, Verdict aggregate, const ReviewPolicy& policy);

std::string utc_now_iso8601();

/// decisions.json as written by the review service.
std::map<std::string, RetentionDecision> load_decisions(const std::filesystem::path& file);

struct ReviewBatch {
  std::vector<InstructionSample> samples;
  std::size_t next_cursor = 0;
  bool end = false;  // next_cursor reached the end of the subset
};

/// Dataset-level quality review. Each dataset's review subset is a seeded
/// shuffle of its samples (sorted by sample_id), truncated to subset_size;
/// every reviewer sees the same sequence.
///
/// Labels are appended to `state_dir/events.jsonl`; `state_dir/decisions.json`
/// is rewritten after each label. Construction replays the event log.
/// Writes are serialized; reads use the current immutable snapshot.
/// `run_hash` is the config hash recorded in both files' headers.
class ReviewService {
 public:
  ReviewService(std::vector<std::string> registry_datasets, std::vector<InstructionSample> corpus,
                std::vector<CanonicalRecord> records, ReviewPolicy policy, std::filesystem::path state_dir,
                std::string run_hash = {});

  std::vector<std::string> datasets() const;
  bool has_dataset(const std::string& dataset) const;
  std::size_t sample_count(const std::string& dataset) const;
  const std::vector<InstructionSample>& subset(const std::string& dataset) const;

  /// Throws UnknownDataset, or EndOfSubset when cursor is at or past the end.
  ReviewBatch next_batch(const std::string& dataset, std::size_t size, std::size_t cursor) const;

  /// Samples needed before a label is accepted for `dataset`: the policy
  /// minimum, capped at the subset size.
  std::size_t required_views(const std::string& dataset) const;

  /// Throws UnknownDataset or InsufficientReview.
  void submit_label(QualityLabel label);

  std::optional<Verdict> aggregate(const std::string& dataset) const;
  std::map<std::string, Verdict> labels(const std::string& dataset) const;  // reviewer -> latest verdict
  /// Throws NoVerdict.
  RetentionDecision retention(const std::string& dataset) const;
  std::map<std::string, RetentionDecision> decisions() const;

  const CanonicalRecord* record(const std::string& record_id) const;
  const ReviewPolicy& policy() const noexcept { return policy_; }
  std::filesystem::path events_path() const { return state_dir_ / "events.jsonl"; }
  std::filesystem::path decisions_path() const { return state_dir_ / "decisions.json"; }

 private:
  using LabelState = std::map<std::string, std::map<std::string, Verdict>>;  // dataset -> reviewer -> verdict

  void validate(const QualityLabel& label) const;
  void apply(LabelState& state, const QualityLabel& label) const;
  void write_snapshot(const LabelState& state) const;
  std::shared_ptr<const LabelState> snapshot() const;

  ReviewPolicy policy_;
  std::filesystem::path state_dir_;
  std::string run_hash_;
  std::vector<std::string> datasets_;
  std::map<std::string, std::vector<InstructionSample>> subsets_;
  std::map<std::string, std::size_t> counts_;
  std::map<std::string, CanonicalRecord> records_;

  std::mutex write_mu_;
  std::shared_ptr<const LabelState> state_;
};

}  // namespace medcorpus
