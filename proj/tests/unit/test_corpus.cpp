#include <doctest.h>

#include <random>
#include <set>

#include "medcorpus/corpus.hpp"
#include "medcorpus/error.hpp"
#include "medcorpus/hashing.hpp"
#include "support.hpp"

using namespace medcorpus;

namespace {

CanonicalRecord rec_of(std::string ds = "ds_a", std::optional<BBox> box = std::nullopt) {
  CanonicalRecord r;
  r.image_ref = "img/1.png";
  r.modality = Modality::CT;
  r.label = "nodule";
  r.bbox = box;
  r.task_kind = box ? TaskKind::detection : TaskKind::classification;
  r.source_dataset = std::move(ds);
  r.record_id = record_id(r.source_dataset, r.image_ref, r.label, r.bbox);
  return r;
}

GenerationRequest req_for(const CanonicalRecord& rec, InstructionFormat f, std::string id = "req-1") {
  GenerationRequest q;
  q.request_id = std::move(id);
  q.record_id = rec.record_id;
  q.format = f;
  q.prompt_text = "prompt";
  if (f != InstructionFormat::text_only) q.image_ref = rec.image_ref;
  q.label = rec.label;
  q.source_dataset = rec.source_dataset;
  return q;
}

GenerationResult res_for(const GenerationRequest& q, std::string text) {
  GenerationResult r;
  r.request_id = q.request_id;
  r.text = std::move(text);
  r.backend = "mock";
  return r;
}

InstructionSample sample(std::string ds, std::string text, Language lang = Language::en,
                         InstructionFormat f = InstructionFormat::image_caption) {
  InstructionSample s;
  s.source_record_id = "rec-" + ds;
  s.source_dataset = std::move(ds);
  s.format = f;
  s.language = lang;
  if (f != InstructionFormat::text_only) s.image_ref = "img.png";
  s.messages = {{Role::user, "q"}, {Role::assistant, std::move(text)}};
  s.sample_id = digest_fields({s.source_dataset, s.messages[1].content, to_string(lang)});
  return s;
}

DatasetDescriptor desc_of(std::string id, Modality m, TaskKind k, std::optional<std::string> dept) {
  DatasetDescriptor d;
  d.dataset_id = std::move(id);
  d.modality = m;
  d.task_kind = k;
  d.department = std::move(dept);
  return d;
}

}  // namespace

TEST_CASE("image_caption result maps to one user and one assistant message") {
  const auto rec = rec_of();
  const auto q = req_for(rec, InstructionFormat::image_caption);
  const auto s = assemble(q, res_for(q, "A CT image showing a nodule."), rec);
  REQUIRE(s.messages.size() == 2);
  CHECK(s.messages[0].role == Role::user);
  CHECK(s.messages[1] == Message{Role::assistant, "A CT image showing a nodule."});
  CHECK(s.source_record_id == rec.record_id);
  CHECK(s.image_ref == rec.image_ref);
  CHECK(s.sample_id == digest_fields({"req-1", "en"}));
  CHECK_FALSE(sample_violation(s).has_value());
}

TEST_CASE("mock dialogue text with two pairs becomes four alternating messages") {
  const auto rec = rec_of();
  const auto q = req_for(rec, InstructionFormat::dialogue);
  const auto text = mock_generation_text(q.request_id, rec.label, InstructionFormat::dialogue);
  const auto s = assemble(q, res_for(q, text), rec);
  REQUIRE(s.messages.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s.messages[i].role == (i % 2 ? Role::assistant : Role::user));
  CHECK(s.messages[0].content == "What is the main finding in this image?");
  CHECK_FALSE(sample_violation(s).has_value());
}

TEST_CASE("dialogue parsing edge cases") {
  const auto m = parse_dialogue("Q: one\nA: two\n  continued\nQ: three\r\nA: four\n");
  REQUIRE(m.size() == 4);
  CHECK(m[1].content == "two\n  continued");
  CHECK(m[3].content == "four");
  auto code = [](std::string_view t) {
    try {
      parse_dialogue(t);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code("Q: a\nA: b") == ErrorCode::DialogueParse);
  CHECK(code("Q: a\nQ: b\nA: c\nA: d") == ErrorCode::DialogueParse);
  CHECK(code("intro\nQ: a\nA: b\nQ: c\nA: d") == ErrorCode::DialogueParse);
  CHECK(code("Q: a\nA: b\nQ: c") == ErrorCode::DialogueParse);
  CHECK(code("") == ErrorCode::DialogueParse);
}

TEST_CASE("refused or mismatched results produce no sample") {
  const auto rec = rec_of();
  const auto q = req_for(rec, InstructionFormat::image_caption);
  auto r = res_for(q, "x");
  r.finish_reason = FinishReason::refused;
  CHECK_THROWS_AS(assemble(q, r, rec), Error);
  auto other = res_for(q, "x");
  other.request_id = "someone-else";
  CHECK_THROWS_AS(assemble(q, other, rec), Error);
}

TEST_CASE("visual perception and text_only shapes") {
  const auto rec = rec_of("ds_a", BBox{1, 2, 3, 4});
  auto q = req_for(rec, InstructionFormat::visual_perception);
  q.mcq = MultipleChoice{"Which?", {"cyst", "nodule"}, 1};
  const auto s = assemble(q, res_for(q, "because"), rec);
  REQUIRE(s.messages.size() == 2);
  CHECK(s.messages[0].content.find("B. nodule") != std::string::npos);
  CHECK(s.messages[1].content.rfind("B. nodule", 0) == 0);

  const auto t = req_for(rec, InstructionFormat::text_only, "req-2");
  const auto ts = assemble(t, res_for(t, "explanation"), rec);
  CHECK_FALSE(ts.image_ref.has_value());
  CHECK_FALSE(sample_violation(ts).has_value());
}

TEST_CASE("translated copy keeps provenance and wraps every message") {
  const auto s = sample("ds_a", "text");
  const auto zh = translated_copy(s, [](std::size_t, const std::string& t) { return mock_translation(t); });
  CHECK(zh.language == Language::zh);
  CHECK(zh.sample_id != s.sample_id);
  CHECK(zh.source_record_id == s.source_record_id);
  REQUIRE(zh.messages.size() == s.messages.size());
  for (std::size_t i = 0; i < s.messages.size(); ++i) {
    CHECK(zh.messages[i].role == s.messages[i].role);
    CHECK(strip_mock_translation(zh.messages[i].content) == std::optional<std::string>(s.messages[i].content));
  }
}

TEST_CASE("dedup: duplicates dropped, languages kept, idempotent") {
  auto a = sample("ds_a", "one");
  auto b = sample("ds_a", "two");
  CHECK(dedup({a, b, a}).size() == 2);
  auto a_zh = a;
  a_zh.language = Language::zh;
  CHECK(dedup({a, a_zh}).size() == 2);
}

TEST_CASE("dedup equals a set-filter oracle under random duplicate injection") {
  std::mt19937 gen(8);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<InstructionSample> base;
    for (int i = 0; i < 30; ++i) base.push_back(sample("ds_" + std::to_string(i % 3), "t" + std::to_string(i)));
    std::vector<InstructionSample> stream;
    for (int i = 0; i < 80; ++i) stream.push_back(base[gen() % base.size()]);

    std::set<std::tuple<std::string, int, int, std::string>> seen;
    std::vector<InstructionSample> want;
    for (const auto& s : stream) {
      std::string body;
      for (const auto& m : s.messages) body += std::to_string(static_cast<int>(m.role)) + ":" + m.content + "\n";
      if (seen.insert({s.source_record_id, static_cast<int>(s.format), static_cast<int>(s.language), body}).second) {
        want.push_back(s);
      }
    }
    const auto got = dedup(stream);
    CHECK(got == want);
    CHECK(dedup(got) == got);
  }
}

TEST_CASE("corpus file round-trip") {
  testing::TempDir dir("corpus");
  std::vector<InstructionSample> xs = {sample("ds_a", "one"), sample("ds_b", "two\nlines \"quoted\"", Language::zh),
                                       sample("ds_c", "t", Language::en, InstructionFormat::text_only)};
  xs[0].quality_flag = Verdict::high;
  write_corpus(dir / "c.jsonl", xs, ArtifactMeta{"corpus", 1, "h"});
  CHECK(read_corpus(dir / "c.jsonl") == xs);
}

TEST_CASE("stats: 4 CT + 1 MR gives 80.0 / 20.0") {
  const std::vector<DatasetDescriptor> reg = {desc_of("ct", Modality::CT, TaskKind::classification, "Radiology"),
                                              desc_of("mr", Modality::MR, TaskKind::segmentation, std::nullopt)};
  std::vector<InstructionSample> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(sample("ct", "c" + std::to_string(i)));
  xs.push_back(sample("mr", "m"));
  const auto st = compute_stats(xs, reg);
  CHECK(st.total == 5);
  CHECK(st.by_modality.counts().at("CT") == 4);
  CHECK(st.by_modality.percent_tenths().at("CT") == 800);
  CHECK(st.by_modality.percent_tenths().at("MR") == 200);
  CHECK(st.by_task.counts().at("segmentation") == 1);
  CHECK(st.by_department.total() == 4);
  const auto j = st.to_json();
  CHECK(j["by_modality"]["CT"]["percent"].get<double>() == doctest::Approx(80.0));

  CHECK_THROWS_AS(compute_stats({sample("nope", "x")}, reg), Error);
}

TEST_CASE("stats: empty corpus") {
  const auto st = compute_stats({}, {});
  CHECK(st.total == 0);
  CHECK(st.by_modality.counts().empty());
  CHECK(st.by_language.percent_tenths().empty());
}

TEST_CASE("percent tenths always sum to 1000") {
  std::mt19937 gen(5);
  for (int iter = 0; iter < 500; ++iter) {
    CountTable t;
    const int k = 1 + static_cast<int>(gen() % 9);
    for (int i = 0; i < k; ++i) t.add("l" + std::to_string(i), 1 + gen() % 1000);
    int sum = 0;
    for (const auto& [l, p] : t.percent_tenths()) {
      sum += p;
      const double exact = 1000.0 * static_cast<double>(t.counts().at(l)) / static_cast<double>(t.total());
      CHECK(std::abs(p - exact) < 1.0);
    }
    CHECK(sum == 1000);
  }
}

TEST_CASE("stats merge is associative and commutative") {
  std::mt19937 gen(2);
  const std::vector<DatasetDescriptor> reg = {desc_of("a", Modality::CT, TaskKind::classification, "Radiology"),
                                              desc_of("b", Modality::PET, TaskKind::detection, "Oncology"),
                                              desc_of("c", Modality::OCT, TaskKind::segmentation, std::nullopt)};
  auto random_part = [&] {
    std::vector<InstructionSample> xs;
    const int n = static_cast<int>(gen() % 20);
    for (int i = 0; i < n; ++i) {
      xs.push_back(sample(std::string(1, static_cast<char>('a' + gen() % 3)), "x", gen() % 2 ? Language::en : Language::zh,
                          kAllFormats[gen() % kAllFormats.size()]));
    }
    return xs;
  };
  for (int iter = 0; iter < 50; ++iter) {
    const auto x = random_part(), y = random_part(), z = random_part();
    const auto sx = compute_stats(x, reg), sy = compute_stats(y, reg), sz = compute_stats(z, reg);
    auto left = sx;
    left.merge(sy);
    left.merge(sz);
    auto yz = sy;
    yz.merge(sz);
    auto right = sx;
    right.merge(yz);
    CHECK(left == right);
    auto swapped = sy;
    swapped.merge(sx);
    auto xy = sx;
    xy.merge(sy);
    CHECK(swapped == xy);
    std::vector<InstructionSample> all = x;
    all.insert(all.end(), y.begin(), y.end());
    all.insert(all.end(), z.begin(), z.end());
    CHECK(compute_stats(all, reg) == left);
  }
}

TEST_CASE("table and svg rendering") {
  const std::vector<DatasetDescriptor> reg = {desc_of("ct", Modality::CT, TaskKind::classification, "Radiology")};
  const auto st = compute_stats({sample("ct", "a"), sample("ct", "b")}, reg);
  const auto table = st.render_table();
  CHECK(table.find("CT") != std::string::npos);
  CHECK(table.find("100.0") != std::string::npos);
  const auto svg = CorpusStats::render_svg("Modality", st.by_modality);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("CT") != std::string::npos);
}
