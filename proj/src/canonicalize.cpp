#include "medcorpus/canonicalize.hpp"

#include <algorithm>
#include <cctype>

#include "medcorpus/error.hpp"
#include "medcorpus/hashing.hpp"
#include "medcorpus/kernels/kernels.hpp"

namespace medcorpus {
namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_unclear(const CleanPolicy& policy, const std::string& label) {
  return policy.unclear_labels.contains(lowercase(label));
}

CanonicalRecord make_record(const DatasetDescriptor& desc, const RawRecord& raw, const std::string& label,
                            std::optional<BBox> bbox) {
  CanonicalRecord rec;
  rec.image_ref = raw.image_ref;
  rec.modality = desc.modality;
  rec.label = label;
  rec.department = desc.department;
  rec.bbox = bbox;
  rec.task_kind = bbox ? TaskKind::detection : TaskKind::classification;
  rec.source_dataset = desc.dataset_id;
  rec.language = Language::en;
  rec.record_id = record_id(rec.source_dataset, rec.image_ref, rec.label, rec.bbox);
  return rec;
}

bool is_hex32(const std::string& s) {
  return s.size() == 32 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

}  // namespace

std::string_view to_string(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::UnclearLabel: return "UnclearLabel";
    case RejectReason::BoxTooSmall: return "BoxTooSmall";
    case RejectReason::ImageTooSmall: return "ImageTooSmall";
    case RejectReason::BoxOutOfBounds: return "BoxOutOfBounds";
    case RejectReason::EmptyMask: return "EmptyMask";
    case RejectReason::MaskUnreadable: return "MaskUnreadable";
    case RejectReason::UnlabeledInstance: return "UnlabeledInstance";
    case RejectReason::ShapeViolation: return "ShapeViolation";
    case RejectReason::DuplicateRecord: return "DuplicateRecord";
  }
  return "";
}

ordered_json Rejection::to_json() const {
  ordered_json j;
  j["dataset_id"] = dataset_id;
  j["image_ref"] = image_ref;
  j["label"] = label;
  j["reason"] = to_string(reason);
  j["detail"] = detail;
  return j;
}

std::string record_id(const std::string& source_dataset, const std::string& image_ref,
                      const std::string& label, const std::optional<BBox>& bbox) {
  std::string box;
  if (bbox) {
    box = std::to_string(bbox->x_min) + "," + std::to_string(bbox->y_min) + "," +
          std::to_string(bbox->x_max) + "," + std::to_string(bbox->y_max);
  }
  return digest_fields({source_dataset, image_ref, label, box});
}

ordered_json to_json(const CanonicalRecord& rec) {
  ordered_json j;
  j["record_id"] = rec.record_id;
  j["image_ref"] = rec.image_ref;
  j["modality"] = to_string(rec.modality);
  j["label"] = rec.label;
  j["department"] = rec.department ? ordered_json(*rec.department) : ordered_json(nullptr);
  if (rec.bbox) {
    j["bbox"] = {rec.bbox->x_min, rec.bbox->y_min, rec.bbox->x_max, rec.bbox->y_max};
  } else {
    j["bbox"] = nullptr;
  }
  j["task_kind"] = to_string(rec.task_kind);
  j["source_dataset"] = rec.source_dataset;
  j["language"] = to_string(rec.language);
  return j;
}

CanonicalRecord canonical_from_json(const json& j) {
  if (auto v = canonical_schema_violation(j)) throw Error(ErrorCode::SchemaViolation, *v);
  CanonicalRecord rec;
  rec.record_id = j["record_id"].get<std::string>();
  rec.image_ref = j["image_ref"].get<std::string>();
  rec.modality = parse_modality(j["modality"].get<std::string>());
  rec.label = j["label"].get<std::string>();
  if (!j["department"].is_null()) rec.department = j["department"].get<std::string>();
  if (!j["bbox"].is_null()) {
    const auto& b = j["bbox"];
    rec.bbox = BBox{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
  }
  rec.task_kind = parse_task_kind(j["task_kind"].get<std::string>());
  rec.source_dataset = j["source_dataset"].get<std::string>();
  rec.language = parse_language(j["language"].get<std::string>());
  return rec;
}

std::optional<std::string> canonical_schema_violation(const json& j) {
  if (!j.is_object()) return "record is not an object";
  if (j.size() != kCanonicalFields.size()) return "record has " + std::to_string(j.size()) + " keys";
  for (auto key : kCanonicalFields) {
    if (!j.contains(std::string(key))) return "missing key " + std::string(key);
  }
  auto nonempty_string = [&](const char* key) {
    return j[key].is_string() && !j[key].get<std::string>().empty();
  };
  if (!j["record_id"].is_string() || !is_hex32(j["record_id"].get<std::string>())) {
    return "record_id is not 32 lowercase hex chars";
  }
  if (!nonempty_string("image_ref")) return "image_ref must be a nonempty string";
  if (!nonempty_string("label")) return "label must be a nonempty string";
  if (!nonempty_string("source_dataset")) return "source_dataset must be a nonempty string";
  if (!j["department"].is_null() && !nonempty_string("department")) return "department must be null or a string";
  if (!j["modality"].is_string()) return "modality must be a string";
  try {
    parse_modality(j["modality"].get<std::string>());
  } catch (const Error&) {
    return "unknown modality";
  }
  if (!j["language"].is_string() || (j["language"] != "en" && j["language"] != "zh")) return "bad language";
  if (!j["task_kind"].is_string() || (j["task_kind"] != "classification" && j["task_kind"] != "detection")) {
    return "task_kind must be classification or detection";
  }
  const bool detection = j["task_kind"] == "detection";
  std::optional<BBox> bbox;
  if (j["bbox"].is_null()) {
    if (detection) return "detection record without bbox";
  } else {
    if (!detection) return "classification record with bbox";
    const auto& b = j["bbox"];
    if (!b.is_array() || b.size() != 4) return "bbox must be [x_min,y_min,x_max,y_max]";
    for (const auto& v : b) {
      if (!v.is_number_integer() || v.get<long long>() < 0) return "bbox coordinates must be non-negative integers";
    }
    bbox = BBox{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    if (!bbox->well_ordered()) return "bbox min exceeds max";
  }
  const auto expect = record_id(j["source_dataset"].get<std::string>(), j["image_ref"].get<std::string>(),
                                j["label"].get<std::string>(), bbox);
  if (expect != j["record_id"].get<std::string>()) return "record_id does not match content";
  return std::nullopt;
}

std::vector<InstanceBox> mask_to_bboxes(const GrayImage& mask) {
  if (mask.empty()) throw Error(ErrorCode::EmptyMask, "mask has zero area");
  kernels::BoundsTable table;
  kernels::accumulate_bounds({mask.pixels.data(), mask.width, mask.height,
                              static_cast<std::size_t>(mask.width)},
                             table);
  std::vector<InstanceBox> out;
  for (int id = 1; id < 256; ++id) {
    const auto u = static_cast<std::uint8_t>(id);
    if (!table.present(u)) continue;
    out.push_back({id, BBox{table.x_min[u], table.y_min[u], table.x_max[u], table.y_max[u]}});
  }
  if (out.empty()) throw Error(ErrorCode::EmptyMask, "no foreground pixels");
  return out;
}

MaskLoader file_mask_loader(const DatasetDescriptor& desc) {
  return [desc](const std::string& ref) { return read_gray_png(desc.resolve_ref(ref)); };
}

ImageSizeProbe file_size_probe(const DatasetDescriptor& desc) {
  return [desc](const std::string& ref) { return probe_image_size(desc.resolve_ref(ref)); };
}

std::size_t expanded_units(const RawRecord& raw, const MaskLoader& masks) {
  if (raw.mask_ref) {
    try {
      return mask_to_bboxes(masks(*raw.mask_ref)).size();
    } catch (const Error&) {
      return 1;
    }
  }
  if (!raw.boxes.empty()) return raw.boxes.size();
  return std::max<std::size_t>(1, raw.labels.size());
}

CleanResult clean(const RawRecord& raw, const DatasetDescriptor& desc, const CleanPolicy& policy,
                  const MaskLoader& masks, const ImageSizeProbe& sizes) {
  CleanResult out;
  auto reject = [&](const std::string& label, RejectReason reason, std::string detail) {
    out.rejections.push_back({raw.dataset_id, raw.image_ref, label, reason, std::move(detail)});
  };

  if (auto violation = shape_violation(raw, desc.task_kind)) {
    reject(raw.labels.empty() ? "" : raw.labels.front(), RejectReason::ShapeViolation, *violation);
    return out;
  }

  switch (desc.task_kind) {
    case TaskKind::classification:
      for (const auto& label : raw.labels) {
        if (is_unclear(policy, label)) {
          reject(label, RejectReason::UnclearLabel, "label '" + label + "'");
        } else {
          out.records.push_back(make_record(desc, raw, label, std::nullopt));
        }
      }
      break;

    case TaskKind::detection: {
      const auto size = sizes ? sizes(raw.image_ref) : std::nullopt;
      for (std::size_t i = 0; i < raw.boxes.size(); ++i) {
        const auto& label = raw.labels[i];
        const auto& box = raw.boxes[i];
        if (is_unclear(policy, label)) {
          reject(label, RejectReason::UnclearLabel, "label '" + label + "'");
        } else if (size && (box.x_max >= size->width || box.y_max >= size->height)) {
          reject(label, RejectReason::BoxOutOfBounds,
                 to_string(box) + " outside " + std::to_string(size->width) + "x" + std::to_string(size->height));
        } else {
          out.records.push_back(make_record(desc, raw, label, box));
        }
      }
      break;
    }

    case TaskKind::segmentation: {
      GrayImage mask;
      try {
        mask = masks(*raw.mask_ref);
      } catch (const Error& e) {
        reject("", RejectReason::MaskUnreadable, e.what());
        return out;
      }
      std::vector<InstanceBox> instances;
      try {
        instances = mask_to_bboxes(mask);
      } catch (const Error& e) {
        reject("", RejectReason::EmptyMask, *raw.mask_ref);
        return out;
      }
      const bool small_image = mask.width < policy.min_image_side || mask.height < policy.min_image_side;
      for (const auto& inst : instances) {
        const auto it = raw.instance_labels.find(inst.instance_id);
        const std::string label = it == raw.instance_labels.end() ? "" : it->second;
        if (small_image) {
          reject(label, RejectReason::ImageTooSmall,
                 std::to_string(mask.width) + "x" + std::to_string(mask.height));
        } else if (it == raw.instance_labels.end()) {
          reject(label, RejectReason::UnlabeledInstance, "instance " + std::to_string(inst.instance_id));
        } else if (is_unclear(policy, label)) {
          reject(label, RejectReason::UnclearLabel, "label '" + label + "'");
        } else if (inst.box.area() < policy.min_box_area) {
          reject(label, RejectReason::BoxTooSmall,
                 to_string(inst.box) + " area " + std::to_string(inst.box.area()));
        } else {
          out.records.push_back(make_record(desc, raw, label, inst.box));
        }
      }
      break;
    }
  }
  return out;
}

CleanResult clean(const RawRecord& raw, const DatasetDescriptor& desc, const CleanPolicy& policy) {
  return clean(raw, desc, policy, file_mask_loader(desc), file_size_probe(desc));
}

CanonicalRecord recanonicalize(const CanonicalRecord& rec) {
  CanonicalRecord out = rec;
  if (out.department && out.department->empty()) out.department.reset();
  out.task_kind = out.bbox ? TaskKind::detection : TaskKind::classification;
  out.record_id = record_id(out.source_dataset, out.image_ref, out.label, out.bbox);
  return out;
}

}  // namespace medcorpus
