#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medcorpus/artifact.hpp"
#include "medcorpus/corpus.hpp"
#include "medcorpus/review.hpp"
#include "medcorpus/types.hpp"

namespace medcorpus {

struct MixEntry {
  std::string dataset_name;
  std::string category;
  std::uint64_t available = 0;
  double ratio = 0.0;  // in [0, 1]
};

struct StageMixSpec {
  Stage stage = Stage::I;
  std::vector<MixEntry> entries;
  std::uint64_t seed = 0;

  void validate() const;
  ordered_json to_json() const;
};

/// One row of the ratio table. `available` may be omitted, meaning every
/// sample the index holds for that dataset.
struct MixTableRow {
  std::string category;
  std::string dataset_name;
  std::optional<std::uint64_t> available;
  double ratio_stage_1_2 = 0.0;
  double ratio_stage_3 = 0.0;
};

/// Ratio table as a JSON document:
///   {"rows": [{"category", "dataset_name", "available", "ratio_stage_1_2", "ratio_stage_3"}, ...]}
struct MixTable {
  std::vector<MixTableRow> rows;

  static MixTable from_json(const json& j);
  static MixTable load(const std::filesystem::path& file);
};

class CorpusIndex;

/// Stages I and II share the "stage 1&2" column.
StageMixSpec stage_spec(const MixTable& table, Stage stage, std::uint64_t seed, const CorpusIndex& index);

/// Sample ids per dataset, sorted. Pools are either explicit id lists or
/// synthetic ("<dataset>/<9-digit position>") generated on demand, which
/// keeps full-scale mixes cheap.
class CorpusIndex {
 public:
  void add_pool(const std::string& dataset, std::vector<std::string> ids);
  void add_synthetic(const std::string& dataset, std::uint64_t count);
  static CorpusIndex from_corpus(const std::vector<InstructionSample>& corpus);

  bool contains(const std::string& dataset) const;
  std::uint64_t size(const std::string& dataset) const;
  std::string id_at(const std::string& dataset, std::uint64_t position) const;
  std::vector<std::string> datasets() const;

 private:
  struct Pool {
    std::vector<std::string> ids;
    std::uint64_t synthetic_count = 0;
    bool synthetic = false;
  };
  const Pool& pool(const std::string& dataset) const;
  std::map<std::string, Pool> pools_;
};

struct ManifestPick {
  std::string dataset_name;
  std::string category;
  std::uint64_t available = 0;
  double ratio = 0.0;
  std::vector<std::uint32_t> positions;  // ascending positions into the sorted pool
};

struct StageManifest {
  Stage stage = Stage::I;
  std::vector<ManifestPick> picks;
  std::uint64_t total = 0;

  std::vector<std::pair<std::string, std::string>> sample_ids(const CorpusIndex& index) const;
};

/// Seeded sampling without replacement of round_half_up(available * ratio)
/// ids per entry, drawn from the first `available` ids of the sorted pool.
/// Throws InsufficientSamples when a pool is missing or too small.
StageManifest apply_mix(const StageMixSpec& spec, const CorpusIndex& index);

/// Stage-III ratio multipliers: ratio *= retained_fraction, and 0 when the
/// dataset is not retained. Datasets without a decision are unchanged.
StageMixSpec apply_retention(const StageMixSpec& spec, const std::map<std::string, RetentionDecision>& decisions);

using TokenEstimator = std::function<std::uint64_t(const InstructionSample&)>;
inline constexpr std::uint64_t kImageTokenStub = 64;

/// ceil(code points of all messages / 4) + 64 when an image is attached;
/// never below 1.
std::uint64_t token_len(const InstructionSample& s);

struct PackItem {
  std::string sample_id;
  std::uint64_t length = 0;
};

struct PackedSequence {
  std::string seq_id;
  std::vector<std::string> member_sample_ids;
  std::vector<std::uint64_t> token_lengths;
  std::uint64_t budget = 0;
  bool overflow = false;

  std::uint64_t tokens() const;
  ordered_json to_json() const;
};

inline constexpr std::uint64_t kDefaultPackBudget = 4096;

/// Greedy in-order packing: items join the open sequence while its sum
/// stays within budget, otherwise the sequence is closed. An item longer
/// than the budget is emitted alone with overflow=true.
std::vector<PackedSequence> soft_pack(const std::vector<PackItem>& items, std::uint64_t budget,
                                      const std::string& seq_prefix = "seq");

/// JSONL of {dataset_name, sample_id} in manifest order.
void write_manifest(const std::filesystem::path& file, const StageManifest& m, const CorpusIndex& index,
                    const ArtifactMeta& meta);
void write_packed(const std::filesystem::path& file, const std::vector<PackedSequence>& seqs,
                  const ArtifactMeta& meta);

}  // namespace medcorpus
