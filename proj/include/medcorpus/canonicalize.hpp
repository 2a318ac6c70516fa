#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "medcorpus/artifact.hpp"
#include "medcorpus/image_io.hpp"
#include "medcorpus/ingest.hpp"
#include "medcorpus/types.hpp"

namespace medcorpus {

/// The standardized tuple <image, modality, label, department, bbox> plus
/// traceability fields. Segmentation sources become detection records.
struct CanonicalRecord {
  std::string record_id;
  std::string image_ref;
  Modality modality = Modality::CT;
  std::string label;
  std::optional<std::string> department;
  std::optional<BBox> bbox;
  TaskKind task_kind = TaskKind::classification;  // classification or detection only
  std::string source_dataset;
  Language language = Language::en;

  bool operator==(const CanonicalRecord&) const = default;
};

/// Field names of the canonical corpus JSONL schema, in emission order.
inline constexpr std::array<std::string_view, 9> kCanonicalFields = {
    "record_id", "image_ref", "modality", "label", "department",
    "bbox",      "task_kind", "source_dataset", "language",
};

ordered_json to_json(const CanonicalRecord& rec);
CanonicalRecord canonical_from_json(const json& j);

/// Empty when `j` matches the canonical schema exactly (key set, types,
/// enum values, bbox presence per task kind, record_id consistency).
std::optional<std::string> canonical_schema_violation(const json& j);

/// 32-hex digest of dataset_id, image_ref, label and bbox.
std::string record_id(const std::string& source_dataset, const std::string& image_ref,
                      const std::string& label, const std::optional<BBox>& bbox);

struct InstanceBox {
  int instance_id = 0;
  BBox box;
  bool operator==(const InstanceBox&) const = default;
};

/// Tight box per distinct nonzero id, ascending by id. Throws EmptyMask
/// when the mask has no foreground.
std::vector<InstanceBox> mask_to_bboxes(const GrayImage& mask);

struct CleanPolicy {
  long long min_box_area = 100;
  int min_image_side = 64;
  std::set<std::string> unclear_labels = {"", "unknown", "unclear", "n/a", "na", "none", "?"};
};

enum class RejectReason {
  UnclearLabel,
  BoxTooSmall,
  ImageTooSmall,
  BoxOutOfBounds,
  EmptyMask,
  MaskUnreadable,
  UnlabeledInstance,
  ShapeViolation,
  DuplicateRecord,
};

std::string_view to_string(RejectReason r) noexcept;

struct Rejection {
  std::string dataset_id;
  std::string image_ref;
  std::string label;
  RejectReason reason = RejectReason::ShapeViolation;
  std::string detail;

  ordered_json to_json() const;
};

struct CleanResult {
  std::vector<CanonicalRecord> records;
  std::vector<Rejection> rejections;
};

using MaskLoader = std::function<GrayImage(const std::string& mask_ref)>;
using ImageSizeProbe = std::function<std::optional<ImageSize>(const std::string& image_ref)>;

/// Loaders resolving refs through the descriptor's directory.
MaskLoader file_mask_loader(const DatasetDescriptor& desc);
ImageSizeProbe file_size_probe(const DatasetDescriptor& desc);

/// Number of annotation units `raw` expands to (labels, boxes or mask
/// instances; at least one). Every unit ends up as exactly one record or
/// one rejection.
std::size_t expanded_units(const RawRecord& raw, const MaskLoader& masks);

/// Total: every annotation unit becomes a record or a Rejection.
CleanResult clean(const RawRecord& raw, const DatasetDescriptor& desc, const CleanPolicy& policy,
                  const MaskLoader& masks, const ImageSizeProbe& sizes);
CleanResult clean(const RawRecord& raw, const DatasetDescriptor& desc, const CleanPolicy& policy);

/// Re-derives id and normal form from an exported record.
CanonicalRecord recanonicalize(const CanonicalRecord& rec);

}  // namespace medcorpus
