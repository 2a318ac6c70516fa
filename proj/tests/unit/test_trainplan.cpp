#include <doctest.h>

#include <cmath>
#include <random>

#include "medcorpus/error.hpp"
#include "medcorpus/schema.hpp"
#include "medcorpus/trainplan.hpp"
#include "support.hpp"

using namespace medcorpus;

namespace {

PlanStage plan_stage(Stage s, std::uint64_t samples = 10) {
  PlanStage p;
  p.config = stage_config(s);
  const std::string name(to_string(s));
  p.manifest_path = "compose/stage_" + name + ".manifest.jsonl";
  p.manifest_sha256 = std::string(64, 'a');
  p.manifest_samples = samples;
  p.packed_path = "compose/stage_" + name + ".packed.jsonl";
  p.packed_sha256 = std::string(64, 'b');
  p.packing_budget = 4096;
  p.packed_sequences = 3;
  return p;
}

const ArtifactMeta kMeta{"train-plan", 1, std::string(64, 'c')};

json schema() { return testing::read_json(testing::source_dir() / "docs" / "train_plan.schema.json"); }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("stage configs equal the golden settings") {
  const auto golden = testing::read_json(testing::source_dir() / "tests" / "golden" / "stage_configs.json");
  for (Stage s : {Stage::I, Stage::II, Stage::III}) {
    CAPTURE(to_string(s));
    CHECK(json::parse(stage_config(s).to_json().dump()) == golden[std::string(to_string(s))]);
  }
  CHECK(stage_config(Stage::I).base_lr == 1e-3);
  CHECK(stage_config(Stage::II).base_lr == 1e-4);
  CHECK(stage_config(Stage::III).base_lr == 1e-5);
  CHECK(stage_config(Stage::I).freeze == FreezeSpec{true, true, false});
  CHECK(stage_config(Stage::II).freeze == FreezeSpec{true, false, false});
  CHECK(stage_config(Stage::III).freeze == FreezeSpec{false, false, false});
}

TEST_CASE("trainable components grow monotonically across stages") {
  auto trainable = [](const FreezeSpec& f) { return std::array<bool, 3>{!f.llm, !f.vision_encoder, !f.projector}; };
  const auto a = trainable(stage_config(Stage::I).freeze);
  const auto b = trainable(stage_config(Stage::II).freeze);
  const auto c = trainable(stage_config(Stage::III).freeze);
  for (int i = 0; i < 3; ++i) {
    CHECK((!a[i] || b[i]));
    CHECK((!b[i] || c[i]));
  }
}

TEST_CASE("effective batch") {
  CHECK(effective_batch(BatchShape{32, 8, 2}) == 512);
  CHECK(effective_batch(BatchShape{32, 4, 4}) == 512);
  CHECK(effective_batch(BatchShape{1, 1, 1}) == 1);
  for (Stage s : {Stage::I, Stage::II, Stage::III}) CHECK(effective_batch(stage_config(s)) == 512);
  CHECK_THROWS_AS(effective_batch(BatchShape{0, 1, 1}), Error);
}

TEST_CASE("lr_at endpoints, midpoint and formula") {
  auto cfg = stage_config(Stage::I);
  CHECK(lr_at(cfg, 0, 1000) == cfg.base_lr);
  CHECK(lr_at(cfg, 1000, 1000) == 0.0);
  CHECK(std::abs(lr_at(cfg, 500, 1000) - 5e-4) < 1e-12);
  for (std::uint64_t s : {1u, 123u, 777u, 999u}) {
    const double want = 0.5 * 1e-3 * (1 + std::cos(M_PI * static_cast<double>(s) / 1000.0));
    CHECK(std::abs(lr_at(cfg, s, 1000) - want) < 1e-15);
  }
  cfg.lr_min = 1e-6;
  CHECK(lr_at(cfg, 1000, 1000) == 1e-6);
  CHECK(std::abs(lr_at(cfg, 500, 1000) - (1e-3 + 1e-6) / 2) < 1e-12);
  CHECK_THROWS_AS(lr_at(cfg, 1001, 1000), Error);
  CHECK_THROWS_AS(lr_at(cfg, 0, 0), Error);
}

TEST_CASE("lr_at is non-increasing on random grids") {
  std::mt19937_64 gen(21);
  for (int iter = 0; iter < 300; ++iter) {
    TrainStageConfig cfg = stage_config(Stage::II);
    cfg.base_lr = std::ldexp(1.0, -static_cast<int>(1 + gen() % 20));
    cfg.lr_min = cfg.base_lr * static_cast<double>(gen() % 100) / 100.0;
    const std::uint64_t total = 1 + gen() % 5000;
    double prev = lr_at(cfg, 0, total);
    for (std::uint64_t s = 1; s <= total; ++s) {
      const double cur = lr_at(cfg, s, total);
      REQUIRE(cur <= prev);
      REQUIRE(cur >= cfg.lr_min);
      prev = cur;
    }
  }
}

TEST_CASE("overrides record deviations") {
  auto cfg = stage_config(Stage::II);
  const auto devs = apply_overrides(cfg, json::parse(R"({"base_lr": 2e-4, "batch": {"gpus": 8}, "freeze": {"llm": true}})"));
  CHECK(cfg.base_lr == 2e-4);
  CHECK(cfg.batch.gpus == 8);
  REQUIRE(devs.size() == 2);  // freeze.llm is unchanged
  CHECK(devs[0].field == "base_lr");
  CHECK(devs[0].published == 1e-4);
  CHECK(devs[0].value == 2e-4);
  CHECK(devs[1].field == "batch.gpus");

  auto c2 = stage_config(Stage::I);
  CHECK(code_of([&] { apply_overrides(c2, json::parse(R"({"warmup": 100})")); }) == ErrorCode::UnknownField);
  CHECK(code_of([&] { apply_overrides(c2, json::parse(R"({"batch": {"nodes": 2}})")); }) == ErrorCode::UnknownField);
  CHECK(code_of([&] { apply_overrides(c2, json::parse(R"({"lr_min": 1.0})")); }) == ErrorCode::Config);
}

TEST_CASE("override file") {
  testing::TempDir dir("ovr");
  write_text_file(dir / "o.json", R"({"III": {"drop_rate": 0.1}})");
  const auto o = load_override_file(dir / "o.json");
  CHECK(o.size() == 1);
  CHECK(o.at(Stage::III)["drop_rate"] == 0.1);
  write_text_file(dir / "bad.json", R"({"IV": {}})");
  CHECK_THROWS_AS(load_override_file(dir / "bad.json"), Error);
}

TEST_CASE("emitted plan validates against the published schema") {
  const auto plan = emit_plan({plan_stage(Stage::I), plan_stage(Stage::II), plan_stage(Stage::III)}, kMeta);
  const auto errs = schema_errors(schema(), json::parse(plan.dump()));
  for (const auto& e : errs) INFO(e);
  CHECK(errs.empty());
  CHECK(plan["stages"].size() == 3);
  CHECK(plan["stages"][2]["data"]["manifest_sha256"] == std::string(64, 'a'));

  auto cfg = plan_stage(Stage::III);
  cfg.deviations = apply_overrides(cfg.config, json::parse(R"({"precision": "fp32"})"));
  const auto with_dev = emit_plan({cfg}, kMeta);
  CHECK(schema_errors(schema(), json::parse(with_dev.dump())).empty());
  CHECK(with_dev["stages"][0]["deviations"][0]["field"] == "precision");
}

TEST_CASE("schema checker catches violations") {
  auto plan = json::parse(emit_plan({plan_stage(Stage::I)}, kMeta).dump());
  plan["stages"][0]["config"]["optimizer"]["name"] = "sgd";
  plan["stages"][0]["data"]["surprise"] = 1;
  plan.erase("plan_version");
  const auto errs = schema_errors(schema(), plan);
  CHECK(errs.size() == 3);
}

TEST_CASE("plan errors: stage order and empty manifests") {
  CHECK(code_of([] { emit_plan({plan_stage(Stage::II), plan_stage(Stage::I)}, kMeta); }) == ErrorCode::StageOrder);
  CHECK(code_of([] { emit_plan({plan_stage(Stage::I), plan_stage(Stage::I)}, kMeta); }) == ErrorCode::StageOrder);
  CHECK(code_of([] { emit_plan({plan_stage(Stage::I, 0)}, kMeta); }) == ErrorCode::EmptyManifest);
  CHECK(code_of([] { emit_plan({}, kMeta); }) == ErrorCode::EmptyManifest);
  CHECK(emit_plan({plan_stage(Stage::I), plan_stage(Stage::III)}, kMeta)["stages"].size() == 2);
}

TEST_CASE("plan emission is deterministic") {
  const std::vector<PlanStage> st = {plan_stage(Stage::I), plan_stage(Stage::II)};
  CHECK(emit_plan(st, kMeta).dump() == emit_plan(st, kMeta).dump());
}
