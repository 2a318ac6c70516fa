#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "medcorpus/artifact.hpp"
#include "medcorpus/types.hpp"

namespace medcorpus {

struct FreezeSpec {
  bool llm = true;
  bool vision_encoder = true;
  bool projector = false;
  bool operator==(const FreezeSpec&) const = default;
};

struct BatchShape {
  int gpus = 1;
  int micro_batch = 1;
  int grad_accum = 1;
  bool operator==(const BatchShape&) const = default;
};

struct TrainStageConfig {
  Stage stage = Stage::I;
  FreezeSpec freeze;
  double base_lr = 0.0;
  std::string lr_schedule = "cosine_decay";
  double lr_min = 0.0;
  std::string optimizer = "adamw";
  double beta1 = 0.9;
  double beta2 = 0.999;
  int input_size = 336;
  BatchShape batch;
  std::string packing = "soft";
  std::string precision = "DeepSpeed bf16";
  double drop_rate = 0.0;

  bool operator==(const TrainStageConfig&) const = default;
  ordered_json to_json() const;
};

/// Published settings for each stage.
TrainStageConfig stage_config(Stage stage);

std::uint64_t effective_batch(const BatchShape& b);
inline std::uint64_t effective_batch(const TrainStageConfig& cfg) { return effective_batch(cfg.batch); }

/// Cosine decay from base_lr at step 0 to lr_min at total_steps. Both
/// endpoints are returned exactly; values stay within [lr_min, base_lr].
double lr_at(const TrainStageConfig& cfg, std::uint64_t step, std::uint64_t total_steps);

/// A setting that differs from the published value.
struct Deviation {
  std::string field;
  json published;
  json value;
  ordered_json to_json() const;
};

/// Applies an override object such as {"base_lr": 2e-4, "batch": {"gpus": 8}}
/// and returns one Deviation per changed field. Unknown keys throw
/// UnknownField.
std::vector<Deviation> apply_overrides(TrainStageConfig& cfg, const json& overrides);

/// Override file: {"I": {...}, "II": {...}, "III": {...}}, all optional.
std::map<Stage, json> load_override_file(const std::filesystem::path& file);

/// One stage of the plan, bound to its data.
struct PlanStage {
  TrainStageConfig config;
  std::vector<Deviation> deviations;
  std::string manifest_path;  // relative to the run output directory
  std::string manifest_sha256;
  std::uint64_t manifest_samples = 0;
  std::string packed_path;
  std::string packed_sha256;
  std::uint64_t packing_budget = 0;
  std::uint64_t packed_sequences = 0;
};

/// Stages must be strictly increasing (I < II < III; a stage may be
/// absent) or StageOrder is thrown; an empty manifest throws EmptyManifest.
ordered_json emit_plan(const std::vector<PlanStage>& stages, const ArtifactMeta& meta);

}  // namespace medcorpus
