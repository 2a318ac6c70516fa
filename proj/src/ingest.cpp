#include "medcorpus/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <set>
#include <unordered_map>

#include "csv.hpp"
#include "medcorpus/error.hpp"

namespace medcorpus {
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 9> kDescriptorKeys = {
    "dataset_id", "name", "task_kind", "modality", "department",
    "source", "root_path", "annotation_file", "license_note",
};

constexpr std::array<std::string_view, 5> kImageExtensions = {".png", ".jpg", ".jpeg", ".bmp", ".tif"};

std::string required_string(const json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) throw Error(ErrorCode::MissingField, key);
  if (!doc[key].is_string()) throw Error(ErrorCode::InvalidField, std::string(key) + " must be a string");
  auto value = doc[key].get<std::string>();
  if (value.empty()) throw Error(ErrorCode::MissingField, key);
  return value;
}

std::optional<std::string> optional_string(const json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
  if (!doc[key].is_string()) throw Error(ErrorCode::InvalidField, std::string(key) + " must be a string");
  auto value = doc[key].get<std::string>();
  if (value.empty()) return std::nullopt;
  return value;
}

std::string normalized_ref(const std::string& root, const std::string& leaf) {
  return (fs::path(root) / leaf).lexically_normal().generic_string();
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<int, std::vector<std::string>>> rows;  // (line number, fields)
};

CsvTable read_csv(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open annotation file " + file.string());
  CsvTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.empty()) continue;
    auto fields = csv::split_line(line);
    if (!fields) throw Error(ErrorCode::AnnotationParse, "line " + std::to_string(line_no) + ": unterminated quote");
    for (auto& f : *fields) f = csv::trim(f);
    if (table.header.empty()) {
      table.header = std::move(*fields);
      continue;
    }
    if (fields->size() != table.header.size()) {
      throw Error(ErrorCode::AnnotationParse,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " columns, got " +
                      std::to_string(fields->size()));
    }
    table.rows.emplace_back(line_no, std::move(*fields));
  }
  if (table.header.empty()) throw Error(ErrorCode::AnnotationParse, "line 1: missing header");
  return table;
}

std::unordered_map<std::string, std::size_t> column_index(const CsvTable& table,
                                                          std::initializer_list<std::string_view> required) {
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < table.header.size(); ++i) idx.emplace(table.header[i], i);
  for (auto col : required) {
    if (!idx.contains(std::string(col))) {
      throw Error(ErrorCode::AnnotationParse, "line 1: missing column '" + std::string(col) + "'");
    }
  }
  return idx;
}

std::map<std::string, std::string> passthrough(const CsvTable& table, const std::vector<std::string>& row,
                                               std::initializer_list<std::string_view> known) {
  std::map<std::string, std::string> extra;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (std::find(known.begin(), known.end(), table.header[i]) == known.end()) {
      extra.emplace(table.header[i], row[i]);
    }
  }
  return extra;
}

int parse_coord(const std::string& s, int line, const char* column) {
  int value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || value < 0) {
    throw Error(ErrorCode::AnnotationParse, "line " + std::to_string(line) + ": bad " + column +
                                                " '" + s + "'");
  }
  return value;
}

std::vector<std::string> split_labels(const std::string& cell) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= cell.size()) {
    const auto end = cell.find(';', start);
    auto piece = csv::trim(std::string_view(cell).substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

void load_classification(const DatasetDescriptor& desc, LoadResult& out) {
  const auto table = read_csv(desc.annotation_path());
  const auto col = column_index(table, {"image", "labels"});
  const fs::path root = desc.resolved_root();
  for (const auto& [line, row] : table.rows) {
    ++out.rows;
    const auto& image = row[col.at("image")];
    auto labels = split_labels(row[col.at("labels")]);
    if (image.empty()) {
      out.skipped.push_back({line, image, "EmptyImageField"});
      continue;
    }
    if (labels.empty()) {
      out.skipped.push_back({line, image, "EmptyLabels"});
      continue;
    }
    if (!fs::is_regular_file(root / image)) {
      out.skipped.push_back({line, image, "DanglingImageRef"});
      continue;
    }
    RawRecord rec;
    rec.dataset_id = desc.dataset_id;
    rec.image_ref = normalized_ref(desc.root_path, image);
    rec.labels = std::move(labels);
    rec.extra = passthrough(table, row, {"image", "labels"});
    rec.source_line = line;
    out.records.push_back(std::move(rec));
  }
}

void load_detection(const DatasetDescriptor& desc, LoadResult& out) {
  const auto table = read_csv(desc.annotation_path());
  const auto col = column_index(table, {"image", "label", "x_min", "y_min", "x_max", "y_max"});
  const fs::path root = desc.resolved_root();

  // Rows for the same image collapse into one record, in first-appearance order.
  std::vector<std::string> order;
  std::unordered_map<std::string, RawRecord> by_image;
  for (const auto& [line, row] : table.rows) {
    const auto& image = row[col.at("image")];
    BBox box{parse_coord(row[col.at("x_min")], line, "x_min"), parse_coord(row[col.at("y_min")], line, "y_min"),
             parse_coord(row[col.at("x_max")], line, "x_max"), parse_coord(row[col.at("y_max")], line, "y_max")};
    if (!box.well_ordered()) {
      throw Error(ErrorCode::AnnotationParse,
                  "line " + std::to_string(line) + ": box min exceeds max " + to_string(box));
    }
    auto [it, inserted] = by_image.try_emplace(image);
    RawRecord& rec = it->second;
    if (inserted) {
      order.push_back(image);
      rec.dataset_id = desc.dataset_id;
      rec.image_ref = normalized_ref(desc.root_path, image);
      rec.source_line = line;
      rec.extra = passthrough(table, row, {"image", "label", "x_min", "y_min", "x_max", "y_max"});
    }
    rec.labels.push_back(row[col.at("label")]);
    rec.boxes.push_back(box);
  }
  for (const auto& image : order) {
    ++out.rows;
    RawRecord& rec = by_image.at(image);
    if (image.empty() || !fs::is_regular_file(root / image)) {
      out.skipped.push_back({rec.source_line, image, image.empty() ? "EmptyImageField" : "DanglingImageRef"});
      continue;
    }
    out.records.push_back(std::move(rec));
  }
}

std::map<int, std::string> read_instance_labels(const fs::path& mask_dir) {
  std::map<int, std::string> labels;
  const fs::path file = mask_dir / "labels.json";
  if (!fs::exists(file)) return labels;
  json doc;
  try {
    doc = json::parse(read_text_file(file));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::AnnotationParse, file.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::AnnotationParse, file.string() + ": expected an object");
  for (const auto& [key, value] : doc.items()) {
    int id = 0;
    auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
    if (ec != std::errc() || ptr != key.data() + key.size() || id < 1 || id > 255 || !value.is_string()) {
      throw Error(ErrorCode::AnnotationParse, file.string() + ": bad entry '" + key + "'");
    }
    labels.emplace(id, value.get<std::string>());
  }
  return labels;
}

void load_segmentation(const DatasetDescriptor& desc, LoadResult& out) {
  const fs::path mask_dir = desc.annotation_path();
  if (!fs::is_directory(mask_dir)) throw Error(ErrorCode::Io, "mask directory not found: " + mask_dir.string());
  const auto instance_labels = read_instance_labels(mask_dir);

  std::vector<fs::path> masks;
  for (const auto& entry : fs::directory_iterator(mask_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") masks.push_back(entry.path());
  }
  std::sort(masks.begin(), masks.end());

  const fs::path image_dir = desc.resolved_root() / "images";
  int line = 0;
  for (const auto& mask : masks) {
    ++line;
    ++out.rows;
    const std::string stem = mask.stem().string();
    std::optional<std::string> image;
    for (auto ext : kImageExtensions) {
      if (fs::is_regular_file(image_dir / (stem + std::string(ext)))) {
        image = "images/" + stem + std::string(ext);
        break;
      }
    }
    if (!image) {
      out.skipped.push_back({line, "images/" + stem, "DanglingImageRef"});
      continue;
    }
    RawRecord rec;
    rec.dataset_id = desc.dataset_id;
    rec.image_ref = normalized_ref(desc.root_path, *image);
    rec.mask_ref = normalized_ref(desc.root_path,
                                  (fs::path(desc.annotation_file) / mask.filename()).generic_string());
    rec.instance_labels = instance_labels;
    for (const auto& [id, label] : instance_labels) rec.labels.push_back(label);
    rec.source_line = line;
    out.records.push_back(std::move(rec));
  }
}

}  // namespace

fs::path DatasetDescriptor::resolved_root() const {
  fs::path root(root_path);
  return root.is_absolute() ? root : (base_dir / root).lexically_normal();
}

fs::path DatasetDescriptor::annotation_path() const { return resolved_root() / annotation_file; }

fs::path DatasetDescriptor::resolve_ref(const std::string& ref) const {
  fs::path p(ref);
  return p.is_absolute() ? p : (base_dir / p).lexically_normal();
}

DatasetDescriptor parse_descriptor_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidField, "descriptor must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (std::find(kDescriptorKeys.begin(), kDescriptorKeys.end(), key) == kDescriptorKeys.end()) {
      throw Error(ErrorCode::UnknownField, key);
    }
  }
  DatasetDescriptor d;
  d.dataset_id = required_string(doc, "dataset_id");
  d.name = required_string(doc, "name");
  d.task_kind = parse_task_kind(required_string(doc, "task_kind"));
  d.modality = parse_modality(required_string(doc, "modality"));
  d.department = optional_string(doc, "department");
  d.source = required_string(doc, "source");
  d.root_path = required_string(doc, "root_path");
  d.annotation_file = required_string(doc, "annotation_file");
  d.license_note = optional_string(doc, "license_note");
  d.base_dir = base_dir;
  return d;
}

DatasetDescriptor parse_descriptor(const fs::path& file) {
  json doc;
  try {
    doc = json::parse(read_text_file(file));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidField, file.string() + ": " + e.what());
  }
  try {
    return parse_descriptor_json(doc, file.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), file.string() + ": " + e.detail());
  }
}

ordered_json serialize_descriptor(const DatasetDescriptor& d) {
  ordered_json j;
  j["dataset_id"] = d.dataset_id;
  j["name"] = d.name;
  j["task_kind"] = to_string(d.task_kind);
  j["modality"] = to_string(d.modality);
  if (d.department) j["department"] = *d.department;
  j["source"] = d.source;
  j["root_path"] = d.root_path;
  j["annotation_file"] = d.annotation_file;
  if (d.license_note) j["license_note"] = *d.license_note;
  return j;
}

std::vector<DatasetDescriptor> load_registry(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "registry directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<DatasetDescriptor> out;
  std::set<std::string> seen;
  for (const auto& f : files) {
    auto d = parse_descriptor(f);
    if (!seen.insert(d.dataset_id).second) {
      throw Error(ErrorCode::DuplicateDataset, f.string() + ": dataset_id '" + d.dataset_id + "'");
    }
    out.push_back(std::move(d));
  }
  return out;
}

ordered_json RawRecord::to_json() const {
  ordered_json j;
  j["dataset_id"] = dataset_id;
  j["image_ref"] = image_ref;
  j["labels"] = labels;
  j["mask_ref"] = mask_ref ? ordered_json(*mask_ref) : ordered_json(nullptr);
  ordered_json boxes_json = ordered_json::array();
  for (const auto& b : boxes) boxes_json.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
  j["boxes"] = boxes_json;
  j["extra"] = extra;
  ordered_json inst = ordered_json::object();
  for (const auto& [id, label] : instance_labels) inst[std::to_string(id)] = label;
  j["instance_labels"] = inst;
  j["source_line"] = source_line;
  return j;
}

LoadResult load_records(const DatasetDescriptor& desc) {
  LoadResult out;
  switch (desc.task_kind) {
    case TaskKind::classification: load_classification(desc, out); break;
    case TaskKind::detection: load_detection(desc, out); break;
    case TaskKind::segmentation: load_segmentation(desc, out); break;
  }
  return out;
}

std::optional<std::string> shape_violation(const RawRecord& raw, TaskKind kind) {
  switch (kind) {
    case TaskKind::classification:
      if (raw.labels.empty()) return "classification record without labels";
      if (raw.mask_ref) return "classification record with mask_ref";
      if (!raw.boxes.empty()) return "classification record with boxes";
      return std::nullopt;
    case TaskKind::detection:
      if (raw.boxes.empty()) return "detection record without boxes";
      if (raw.labels.size() != raw.boxes.size()) return "detection labels/boxes length mismatch";
      for (const auto& b : raw.boxes) {
        if (!b.well_ordered()) return "detection box min exceeds max";
      }
      return std::nullopt;
    case TaskKind::segmentation:
      if (!raw.mask_ref) return "segmentation record without mask_ref";
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace medcorpus
