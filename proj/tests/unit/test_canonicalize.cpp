#include <doctest.h>

#include <map>
#include <random>

#include "medcorpus/canonicalize.hpp"
#include "medcorpus/error.hpp"
#include "support.hpp"

using namespace medcorpus;

namespace {

std::vector<InstanceBox> brute_boxes(const GrayImage& m) {
  std::map<int, BBox> acc;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const int id = m.at(x, y);
      if (id == 0) continue;
      auto [it, fresh] = acc.try_emplace(id, BBox{x, y, x, y});
      if (!fresh) {
        it->second.x_min = std::min(it->second.x_min, x);
        it->second.y_min = std::min(it->second.y_min, y);
        it->second.x_max = std::max(it->second.x_max, x);
        it->second.y_max = std::max(it->second.y_max, y);
      }
    }
  }
  std::vector<InstanceBox> out;
  for (const auto& [id, b] : acc) out.push_back({id, b});
  return out;
}

DatasetDescriptor desc_of(TaskKind kind) {
  DatasetDescriptor d;
  d.dataset_id = "ds";
  d.name = "ds";
  d.task_kind = kind;
  d.modality = Modality::MR;
  d.department = "Neurology";
  d.source = "test";
  d.root_path = ".";
  d.annotation_file = "a";
  return d;
}

RawRecord seg_raw(std::map<int, std::string> labels) {
  RawRecord r;
  r.dataset_id = "ds";
  r.image_ref = "img/x.png";
  r.mask_ref = "mask/x.png";
  r.instance_labels = std::move(labels);
  return r;
}

}  // namespace

TEST_CASE("mask_to_bboxes small examples") {
  GrayImage one(3, 3);
  one.at(1, 1) = 1;
  CHECK(mask_to_bboxes(one) == std::vector<InstanceBox>{{1, BBox{1, 1, 1, 1}}});

  GrayImage full(4, 5);
  std::fill(full.pixels.begin(), full.pixels.end(), 7);
  CHECK(mask_to_bboxes(full) == std::vector<InstanceBox>{{7, BBox{0, 0, 3, 4}}});

  GrayImage empty(8, 8);
  try {
    mask_to_bboxes(empty);
    FAIL("expected EmptyMask");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMask);
  }
}

TEST_CASE("mask_to_bboxes equals a pixel scan on random 16x16 masks") {
  std::mt19937 gen(16);
  for (int iter = 0; iter < 1000; ++iter) {
    GrayImage m(16, 16);
    for (auto& p : m.pixels) p = static_cast<std::uint8_t>(gen() % 4);
    m.at(static_cast<int>(gen() % 16), static_cast<int>(gen() % 16)) = 1;
    REQUIRE(mask_to_bboxes(m) == brute_boxes(m));
  }
}

TEST_CASE("classification record fans out per label") {
  RawRecord r;
  r.dataset_id = "ds";
  r.image_ref = "img/a.png";
  r.labels = {"pneumonia", "effusion"};
  const auto res = clean(r, desc_of(TaskKind::classification), CleanPolicy{}, {}, {});
  REQUIRE(res.records.size() == 2);
  CHECK(res.rejections.empty());
  CHECK(res.records[0].label == "pneumonia");
  CHECK(res.records[1].label == "effusion");
  for (const auto& rec : res.records) {
    CHECK_FALSE(rec.bbox.has_value());
    CHECK(rec.task_kind == TaskKind::classification);
    CHECK(rec.modality == Modality::MR);
    CHECK(rec.department == std::optional<std::string>("Neurology"));
  }
}

TEST_CASE("tiny segmentation instance is rejected as BoxTooSmall") {
  GrayImage mask(64, 64);
  mask.at(10, 10) = mask.at(11, 10) = mask.at(10, 11) = mask.at(11, 11) = 1;
  CleanPolicy policy;
  policy.min_box_area = 16;
  const auto res = clean(seg_raw({{1, "lesion"}}), desc_of(TaskKind::segmentation), policy,
                         [&](const std::string&) { return mask; }, {});
  CHECK(res.records.empty());
  REQUIRE(res.rejections.size() == 1);
  CHECK(res.rejections[0].reason == RejectReason::BoxTooSmall);
}

TEST_CASE("segmentation becomes detection with one record per instance") {
  GrayImage mask(64, 64);
  for (int y = 5; y <= 20; ++y)
    for (int x = 3; x <= 30; ++x) mask.at(x, y) = 2;
  for (int y = 40; y <= 60; ++y)
    for (int x = 40; x <= 50; ++x) mask.at(x, y) = 5;
  mask.at(63, 63) = 9;  // unlabeled
  const auto res = clean(seg_raw({{2, "tumor"}, {5, "edema"}}), desc_of(TaskKind::segmentation), CleanPolicy{},
                         [&](const std::string&) { return mask; }, {});
  REQUIRE(res.records.size() == 2);
  CHECK(res.records[0].bbox == BBox{3, 5, 30, 20});
  CHECK(res.records[0].task_kind == TaskKind::detection);
  CHECK(res.records[1].label == "edema");
  REQUIRE(res.rejections.size() == 1);
  CHECK(res.rejections[0].reason == RejectReason::UnlabeledInstance);
}

TEST_CASE("image below min side rejects every instance") {
  GrayImage mask(32, 32);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) mask.at(x, y) = 1;
  const auto res = clean(seg_raw({{1, "a"}}), desc_of(TaskKind::segmentation), CleanPolicy{},
                         [&](const std::string&) { return mask; }, {});
  REQUIRE(res.rejections.size() == 1);
  CHECK(res.rejections[0].reason == RejectReason::ImageTooSmall);
}

TEST_CASE("detection box outside the image is rejected") {
  RawRecord r;
  r.dataset_id = "ds";
  r.image_ref = "img/a.png";
  r.labels = {"ok", "out", "unknown"};
  r.boxes = {BBox{0, 0, 9, 9}, BBox{5, 5, 100, 10}, BBox{1, 1, 2, 2}};
  const auto res = clean(r, desc_of(TaskKind::detection), CleanPolicy{}, {},
                         [](const std::string&) { return std::optional<ImageSize>(ImageSize{50, 50}); });
  REQUIRE(res.records.size() == 1);
  REQUIRE(res.rejections.size() == 2);
  CHECK(res.rejections[0].reason == RejectReason::BoxOutOfBounds);
  CHECK(res.rejections[1].reason == RejectReason::UnclearLabel);
}

TEST_CASE("record_id determinism and sensitivity") {
  const auto a = record_id("ds", "img/a.png", "x", BBox{1, 2, 3, 4});
  CHECK(a == record_id("ds", "img/a.png", "x", BBox{1, 2, 3, 4}));
  CHECK(a != record_id("ds", "img/a.png", "x", BBox{1, 2, 3, 5}));
  CHECK(a != record_id("ds", "img/a.png", "x", std::nullopt));
  CHECK(a.size() == 32);
}

TEST_CASE("fixture records match the committed golden ids, with conservation") {
  const auto golden = testing::read_json(testing::source_dir() / "tests" / "golden" / "record_ids.json");
  std::map<std::string, std::string> want;
  for (const auto& g : golden["records"]) want[g["record_id"]] = g["label"];

  std::map<std::string, std::string> got;
  std::size_t rejected = 0;
  for (const auto& desc : load_registry(testing::registry())) {
    const auto masks = file_mask_loader(desc);
    for (const auto& raw : load_records(desc).records) {
      const auto res = clean(raw, desc, CleanPolicy{});
      CHECK(res.records.size() + res.rejections.size() == expanded_units(raw, masks));
      rejected += res.rejections.size();
      for (const auto& rec : res.records) {
        got[rec.record_id] = rec.label;
        CHECK_FALSE(canonical_schema_violation(json::parse(to_json(rec).dump())).has_value());
        CHECK(recanonicalize(rec) == rec);
        CHECK(canonical_from_json(json::parse(to_json(rec).dump())) == rec);
        if (rec.task_kind == TaskKind::detection) CHECK(rec.bbox.has_value());
      }
    }
  }
  CHECK(got == want);
  CHECK(rejected == 4);
}

TEST_CASE("canonical schema rejects extra, missing and inconsistent fields") {
  CanonicalRecord rec;
  rec.image_ref = "a.png";
  rec.label = "x";
  rec.source_dataset = "ds";
  rec = recanonicalize(rec);
  const auto good = json::parse(to_json(rec).dump());
  CHECK_FALSE(canonical_schema_violation(good).has_value());
  CHECK(good.size() == kCanonicalFields.size());

  auto extra = good;
  extra["caption"] = "x";
  CHECK(canonical_schema_violation(extra).has_value());

  auto missing = good;
  missing.erase("department");
  CHECK(canonical_schema_violation(missing).has_value());

  auto wrong_id = good;
  wrong_id["record_id"] = std::string(32, '0');
  CHECK(canonical_schema_violation(wrong_id).has_value());

  auto det_without_box = good;
  det_without_box["task_kind"] = "detection";
  CHECK(canonical_schema_violation(det_without_box).has_value());

  auto bad_modality = good;
  bad_modality["modality"] = "MRIX";
  CHECK(canonical_schema_violation(bad_modality).has_value());
}
