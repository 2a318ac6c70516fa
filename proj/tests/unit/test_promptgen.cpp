#include <doctest.h>

#include <regex>
#include <set>

#include "medcorpus/error.hpp"
#include "medcorpus/hashing.hpp"
#include "medcorpus/promptgen.hpp"
#include "support.hpp"

using namespace medcorpus;

namespace {

const std::map<std::string, PromptTemplate>& shipped() {
  static const auto t = load_templates(testing::source_dir() / "data" / "templates");
  return t;
}

CanonicalRecord make_rec(std::string label, std::optional<BBox> box, std::optional<std::string> dept = "Radiology",
                         Modality m = Modality::CT) {
  CanonicalRecord r;
  r.image_ref = "img/a.png";
  r.modality = m;
  r.label = std::move(label);
  r.department = std::move(dept);
  r.bbox = box;
  r.task_kind = box ? TaskKind::detection : TaskKind::classification;
  r.source_dataset = "ds";
  r.record_id = record_id(r.source_dataset, r.image_ref, r.label, r.bbox);
  return r;
}

FormatRecipe recipe_of(std::initializer_list<InstructionFormat> formats) {
  FormatRecipe r;
  for (auto f : formats) r.entries[f] = {std::string(to_string(f)), 1};
  return r;
}

// Independent expansion: drop [[...]] clauses that mention an absent
// placeholder, unwrap the rest, then substitute.
std::string expand(std::string body, const std::map<std::string, std::string>& values) {
  const std::regex clause(R"(\[\[([^\]]*)\]\])");
  std::string out;
  std::sregex_iterator it(body.begin(), body.end(), clause), end;
  std::size_t last = 0;
  for (; it != end; ++it) {
    out += body.substr(last, it->position() - last);
    const std::string inner = (*it)[1];
    bool keep = true;
    const std::regex ph(R"(\{(\w+)\})");
    for (std::sregex_iterator p(inner.begin(), inner.end(), ph); p != end; ++p) keep = keep && values.contains((*p)[1]);
    if (keep) out += inner;
    last = it->position() + it->length();
  }
  out += body.substr(last);
  for (const auto& [k, v] : values) {
    const std::string key = "{" + k + "}";
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + v.size())) out.replace(pos, key.size(), v);
  }
  return out;
}

}  // namespace

TEST_CASE("image_caption prompt embeds modality and label, no bbox") {
  const auto req = build_request(make_rec("pneumonia", std::nullopt), shipped().at("image_caption"), Language::en);
  CHECK(req.prompt_text.find("CT") != std::string::npos);
  CHECK(req.prompt_text.find("pneumonia") != std::string::npos);
  CHECK(req.prompt_text.find('[') == std::string::npos);
  CHECK(req.image_ref == std::optional<std::string>("img/a.png"));
  CHECK(req.format == InstructionFormat::image_caption);
}

TEST_CASE("region_caption prompt contains every bbox coordinate") {
  const auto req = build_request(make_rec("nodule", BBox{10, 20, 30, 40}), shipped().at("region_caption"), Language::en);
  for (const char* c : {"10", "20", "30", "40"}) CHECK(req.prompt_text.find(c) != std::string::npos);
}

TEST_CASE("absent department deletes exactly the department clause") {
  for (const auto& [id, tmpl] : shipped()) {
    CAPTURE(id);
    const std::optional<BBox> box =
        tmpl.format == InstructionFormat::image_caption ? std::nullopt : std::optional<BBox>(BBox{1, 2, 3, 4});
    const auto with = make_rec("cyst", box, "Urology");
    const auto without = make_rec("cyst", box, std::nullopt);
    std::map<std::string, std::string> values = {{"modality", "CT"}, {"label", "cyst"}, {"language", "English"}};
    if (box) values["bbox"] = to_string(*box);
    CHECK(build_request(without, tmpl, Language::en).prompt_text == expand(tmpl.body, values));
    values["department"] = "Urology";
    CHECK(build_request(with, tmpl, Language::en).prompt_text == expand(tmpl.body, values));
  }
}

TEST_CASE("template parsing rejects malformed templates") {
  auto code = [](std::string_view text) {
    try {
      parse_template("t", text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code("format: image_caption\nrequired: modality, label\n---\nA {modality} {label}") == ErrorCode::Io);
  CHECK(code("format: image_caption\nrequired: modality, label\n---\nA {modality} {nope} {label}") ==
        ErrorCode::TemplateInvalid);
  CHECK(code("format: image_caption\nrequired: modality, label\n---\nA {modality} [[{label}]]") ==
        ErrorCode::TemplateInvalid);
  CHECK(code("format: region_caption\nrequired: modality, label\n---\n{modality} {label}") == ErrorCode::TemplateInvalid);
  CHECK(code("format: image_caption\nrequired: modality, label\n---\n{modality} {label} [[x") == ErrorCode::TemplateInvalid);
  CHECK(code("format: sonnet\n---\n{modality} {label}") == ErrorCode::TemplateInvalid);
  CHECK(code("required: modality, label\n---\n{modality} {label}") == ErrorCode::TemplateInvalid);
}

TEST_CASE("required placeholder without a value throws MissingRequiredField") {
  const auto& t = shipped().at("region_caption");
  try {
    build_request(make_rec("x", std::nullopt), t, Language::en);
    FAIL("expected MissingRequiredField");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingRequiredField);
    CHECK(e.detail() == "bbox");
  }
}

TEST_CASE("plan_requests count and order") {
  PlanContext ctx{&shipped(), nullptr, 1, Language::en};
  const auto cls = plan_requests(make_rec("a", std::nullopt),
                                 recipe_of({InstructionFormat::dialogue, InstructionFormat::image_caption}), ctx);
  REQUIRE(cls.size() == 2);
  CHECK(cls[0].format == InstructionFormat::image_caption);
  CHECK(cls[1].format == InstructionFormat::dialogue);

  LabelVocabulary vocab;
  const auto det = make_rec("a", BBox{11, 22, 33, 44});
  vocab.add(det);
  vocab.add(make_rec("b", BBox{1, 1, 5, 5}));
  ctx.vocabulary = &vocab;
  const auto d = plan_requests(det, recipe_of({InstructionFormat::visual_perception, InstructionFormat::region_caption}), ctx);
  REQUIRE(d.size() == 2);
  CHECK(d[0].format == InstructionFormat::region_caption);
  for (const char* c : {"11", "22", "33", "44"}) CHECK(d[0].prompt_text.find(c) != std::string::npos);
  REQUIRE(d[1].mcq.has_value());
  CHECK(d[1].mcq->options.size() == 2);
}

TEST_CASE("request ids are deterministic and distinct per template, language, sequence") {
  const auto rec = make_rec("a", std::nullopt);
  const auto& t = shipped().at("image_caption");
  CHECK(build_request(rec, t, Language::en).request_id == build_request(rec, t, Language::en).request_id);
  CHECK(build_request(rec, t, Language::en).request_id != build_request(rec, t, Language::zh).request_id);
  CHECK(build_request(rec, t, Language::en, 0).request_id != build_request(rec, t, Language::en, 1).request_id);
  CHECK(build_request(rec, t, Language::en).request_id != build_request(rec, shipped().at("dialogue"), Language::en).request_id);
}

TEST_CASE("visual perception question: membership, determinism, uniform answer position") {
  const auto rec = make_rec("melanoma", std::nullopt, "Dermatology", Modality::Dermoscopy);
  const std::vector<std::string> d = {"nevus", "wart", "ulcer"};
  const auto q = build_vp_question(rec, d, 7);
  REQUIRE(q.options.size() == 4);
  CHECK(std::count(q.options.begin(), q.options.end(), "melanoma") == 1);
  CHECK(q.options[q.answer_index] == "melanoma");
  CHECK(std::set<std::string>(q.options.begin(), q.options.end()).size() == 4);
  CHECK(build_vp_question(rec, d, 7) == q);

  std::array<int, 4> hits{};
  for (std::uint64_t seed = 0; seed < 200; ++seed) ++hits[build_vp_question(rec, d, seed).answer_index];
  double chi2 = 0;
  for (int h : hits) chi2 += (h - 50.0) * (h - 50.0) / 50.0;
  // df = 3, p = 0.001
  CHECK(chi2 < 16.27);

  CHECK_THROWS_AS(build_vp_question(rec, {}, 1), Error);
  CHECK_THROWS_AS(build_vp_question(rec, {"nevus", "melanoma"}, 1), Error);
  CHECK(build_vp_question(rec, {"a", "b", "c", "d", "e", "f"}, 3).options.size() == 5);
}

TEST_CASE("fixture corpus: request total matches the hand count and every prompt is annotation-guided") {
  const auto expected = testing::read_json(testing::fixtures() / "expected_counts.json");
  const auto recipe = FormatRecipe::from_json(testing::read_json(testing::source_dir() / "data" / "recipes" / "default.json"));

  std::vector<CanonicalRecord> records;
  for (const auto& desc : load_registry(testing::registry())) {
    for (const auto& raw : load_records(desc).records) {
      for (auto& r : clean(raw, desc, CleanPolicy{}).records) records.push_back(std::move(r));
    }
  }
  LabelVocabulary vocab;
  for (const auto& r : records) vocab.add(r);
  const PlanContext ctx{&shipped(), &vocab, 5, Language::en};

  std::size_t total = 0;
  std::map<std::string, int> by_format;
  std::set<std::string> ids;
  for (const auto& r : records) {
    const auto reqs = plan_requests(r, recipe, ctx);
    CHECK(reqs.size() == formats_for(r.task_kind, recipe).size());
    total += reqs.size();
    for (const auto& q : reqs) {
      ++by_format[std::string(to_string(q.format))];
      ids.insert(q.request_id);
      CHECK(q.prompt_text.find(std::string(to_string(r.modality))) != std::string::npos);
      CHECK(q.prompt_text.find(r.label) != std::string::npos);
      if (q.format == InstructionFormat::region_caption) {
        for (int c : {r.bbox->x_min, r.bbox->y_min, r.bbox->x_max, r.bbox->y_max}) {
          CHECK(q.prompt_text.find(std::to_string(c)) != std::string::npos);
        }
      }
    }
  }
  CHECK(total == expected["requests_total"].get<std::size_t>());
  CHECK(ids.size() == total);
  for (const auto& [f, n] : expected["english_stats"]["by_format"].items()) CHECK(by_format[f] == n.get<int>());
}

TEST_CASE("recipe parsing") {
  const auto r = FormatRecipe::from_json(json::parse(R"({"dialogue": {"template_id": "dialogue", "count": 2}})"));
  CHECK(r.entries.at(InstructionFormat::dialogue).count == 2);
  CHECK_THROWS_AS(FormatRecipe::from_json(json::parse(R"({"poem": {"template_id": "x"}})")), Error);
  CHECK_THROWS_AS(FormatRecipe::from_json(json::parse(R"({"dialogue": {}})")), Error);
}
