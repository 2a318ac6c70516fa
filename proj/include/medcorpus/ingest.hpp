#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medcorpus/artifact.hpp"
#include "medcorpus/types.hpp"

namespace medcorpus {

/// Registration of one source dataset (one JSON document per dataset).
struct DatasetDescriptor {
  std::string dataset_id;
  std::string name;
  TaskKind task_kind = TaskKind::classification;
  Modality modality = Modality::CT;
  std::optional<std::string> department;
  std::string source;
  std::string root_path;        // as written; relative paths resolve against base_dir
  std::string annotation_file;  // relative to root_path
  std::optional<std::string> license_note;

  // Not serialized: directory the descriptor was read from.
  std::filesystem::path base_dir;

  std::filesystem::path resolved_root() const;
  std::filesystem::path annotation_path() const;
  /// Filesystem location of an image_ref produced for this dataset.
  std::filesystem::path resolve_ref(const std::string& ref) const;
};

DatasetDescriptor parse_descriptor(const std::filesystem::path& file);
DatasetDescriptor parse_descriptor_json(const json& doc, const std::filesystem::path& base_dir);
ordered_json serialize_descriptor(const DatasetDescriptor& desc);

/// All `*.json` descriptors in `dir`, sorted by file name; duplicate
/// dataset ids throw DuplicateDataset.
std::vector<DatasetDescriptor> load_registry(const std::filesystem::path& dir);

/// One annotated image as found in the source annotation file.
struct RawRecord {
  std::string dataset_id;
  std::string image_ref;  // root_path / image, lexically normalised
  std::vector<std::string> labels;  // detection: parallel to boxes
  std::optional<std::string> mask_ref;
  std::vector<BBox> boxes;
  std::map<std::string, std::string> extra;
  // Segmentation only: instance id -> label name from the mask directory's labels.json.
  std::map<int, std::string> instance_labels;
  int source_line = 0;

  ordered_json to_json() const;
};

struct SkippedRow {
  int line = 0;
  std::string image;
  std::string reason;
};

struct LoadResult {
  std::vector<RawRecord> records;
  std::vector<SkippedRow> skipped;
  /// Annotation units in the source: data rows (classification), distinct
  /// images (detection), mask files (segmentation).
  std::size_t rows = 0;
};

/// Loads every annotated image for `desc` in annotation-file order. Rows
/// referencing missing images are skipped and reported, never fatal.
/// Malformed annotation content throws AnnotationParse naming the line.
LoadResult load_records(const DatasetDescriptor& desc);

/// Empty when `raw` satisfies the shape invariant of `kind`, otherwise a
/// description of the violation.
std::optional<std::string> shape_violation(const RawRecord& raw, TaskKind kind);

}  // namespace medcorpus
