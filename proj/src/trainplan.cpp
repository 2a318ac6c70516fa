#include "medcorpus/trainplan.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "medcorpus/error.hpp"

namespace medcorpus {

ordered_json TrainStageConfig::to_json() const {
  ordered_json j;
  j["stage"] = to_string(stage);
  j["freeze"] = {{"llm", freeze.llm}, {"vision_encoder", freeze.vision_encoder}, {"projector", freeze.projector}};
  j["base_lr"] = base_lr;
  j["lr_schedule"] = lr_schedule;
  j["lr_min"] = lr_min;
  j["optimizer"] = {{"name", optimizer}, {"beta1", beta1}, {"beta2", beta2}};
  j["input_size"] = input_size;
  j["batch"] = {{"gpus", batch.gpus},
                {"micro_batch", batch.micro_batch},
                {"grad_accum", batch.grad_accum},
                {"effective", effective_batch(batch)}};
  j["packing"] = packing;
  j["precision"] = precision;
  j["drop_rate"] = drop_rate;
  return j;
}

TrainStageConfig stage_config(Stage stage) {
  TrainStageConfig c;
  c.stage = stage;
  switch (stage) {
    case Stage::I:
      c.freeze = {true, true, false};
      c.base_lr = 1e-3;
      c.batch = {32, 8, 2};
      break;
    case Stage::II:
      c.freeze = {true, false, false};
      c.base_lr = 1e-4;
      c.batch = {32, 4, 4};
      break;
    case Stage::III:
      c.freeze = {false, false, false};
      c.base_lr = 1e-5;
      c.batch = {32, 4, 4};
      break;
  }
  return c;
}

std::uint64_t effective_batch(const BatchShape& b) {
  if (b.gpus < 1 || b.micro_batch < 1 || b.grad_accum < 1) {
    throw Error(ErrorCode::InvalidArgument, "batch factors must all be >= 1");
  }
  return static_cast<std::uint64_t>(b.gpus) * static_cast<std::uint64_t>(b.micro_batch) *
         static_cast<std::uint64_t>(b.grad_accum);
}

double lr_at(const TrainStageConfig& cfg, std::uint64_t step, std::uint64_t total_steps) {
  if (total_steps < 1) throw Error(ErrorCode::InvalidArgument, "total_steps must be >= 1");
  if (step > total_steps) throw Error(ErrorCode::InvalidArgument, "step beyond total_steps");
  if (step == 0) return cfg.base_lr;
  if (step == total_steps) return cfg.lr_min;
  const double theta = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  const double lr = cfg.lr_min + 0.5 * (cfg.base_lr - cfg.lr_min) * (1.0 + std::cos(theta));
  return std::clamp(lr, std::min(cfg.lr_min, cfg.base_lr), std::max(cfg.lr_min, cfg.base_lr));
}

ordered_json Deviation::to_json() const { return {{"field", field}, {"published", published}, {"value", value}}; }

namespace {

template <typename T>
void set_field(std::vector<Deviation>& out, const std::string& name, T& slot, const json& v) {
  T next;
  try {
    next = v.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, "override " + name + ": " + e.what());
  }
  if (next != slot) out.push_back({name, json(slot), json(next)});
  slot = next;
}

}  // namespace

std::vector<Deviation> apply_overrides(TrainStageConfig& cfg, const json& overrides) {
  std::vector<Deviation> out;
  if (overrides.is_null()) return out;
  if (!overrides.is_object()) throw Error(ErrorCode::Config, "stage override must be an object");
  for (const auto& [key, v] : overrides.items()) {
    if (key == "base_lr") set_field(out, key, cfg.base_lr, v);
    else if (key == "lr_min") set_field(out, key, cfg.lr_min, v);
    else if (key == "input_size") set_field(out, key, cfg.input_size, v);
    else if (key == "precision") set_field(out, key, cfg.precision, v);
    else if (key == "drop_rate") set_field(out, key, cfg.drop_rate, v);
    else if (key == "beta1") set_field(out, key, cfg.beta1, v);
    else if (key == "beta2") set_field(out, key, cfg.beta2, v);
    else if (key == "batch" || key == "freeze") {
      if (!v.is_object()) throw Error(ErrorCode::Config, "override " + key + " must be an object");
      for (const auto& [sub, sv] : v.items()) {
        const std::string name = key + "." + sub;
        if (key == "batch" && sub == "gpus") set_field(out, name, cfg.batch.gpus, sv);
        else if (key == "batch" && sub == "micro_batch") set_field(out, name, cfg.batch.micro_batch, sv);
        else if (key == "batch" && sub == "grad_accum") set_field(out, name, cfg.batch.grad_accum, sv);
        else if (key == "freeze" && sub == "llm") set_field(out, name, cfg.freeze.llm, sv);
        else if (key == "freeze" && sub == "vision_encoder") set_field(out, name, cfg.freeze.vision_encoder, sv);
        else if (key == "freeze" && sub == "projector") set_field(out, name, cfg.freeze.projector, sv);
        else throw Error(ErrorCode::UnknownField, "override " + name);
      }
    } else {
      throw Error(ErrorCode::UnknownField, "override " + key);
    }
  }
  effective_batch(cfg.batch);
  if (cfg.lr_min > cfg.base_lr) throw Error(ErrorCode::Config, "override lr_min exceeds base_lr");
  return out;
}

std::map<Stage, json> load_override_file(const std::filesystem::path& file) {
  std::map<Stage, json> out;
  json doc;
  try {
    doc = json::parse(read_text_file(file));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, file.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::Config, file.string() + ": expected an object keyed by stage");
  for (const auto& [k, v] : doc.items()) {
    try {
      out[parse_stage(k)] = v;
    } catch (const Error&) {
      throw Error(ErrorCode::UnknownField, file.string() + ": stage '" + k + "'");
    }
  }
  return out;
}

ordered_json emit_plan(const std::vector<PlanStage>& stages, const ArtifactMeta& meta) {
  if (stages.empty()) throw Error(ErrorCode::EmptyManifest, "plan has no stages");
  for (std::size_t i = 1; i < stages.size(); ++i) {
    if (static_cast<int>(stages[i].config.stage) <= static_cast<int>(stages[i - 1].config.stage)) {
      throw Error(ErrorCode::StageOrder, "stage " + std::string(to_string(stages[i].config.stage)) + " follows " +
                                             std::string(to_string(stages[i - 1].config.stage)));
    }
  }
  ordered_json plan;
  plan["_meta"] = meta.to_json();
  plan["plan_version"] = 1;
  ordered_json arr = ordered_json::array();
  for (const auto& s : stages) {
    if (s.manifest_samples == 0) {
      throw Error(ErrorCode::EmptyManifest, "stage " + std::string(to_string(s.config.stage)) + " manifest is empty");
    }
    ordered_json devs = ordered_json::array();
    for (const auto& d : s.deviations) devs.push_back(d.to_json());
    arr.push_back({{"stage", to_string(s.config.stage)},
                   {"config", s.config.to_json()},
                   {"deviations", devs},
                   {"data",
                    {{"manifest", s.manifest_path},
                     {"manifest_sha256", s.manifest_sha256},
                     {"samples", s.manifest_samples},
                     {"packed", s.packed_path},
                     {"packed_sha256", s.packed_sha256},
                     {"packing_budget", s.packing_budget},
                     {"sequences", s.packed_sequences}}}});
  }
  plan["stages"] = arr;
  return plan;
}

}  // namespace medcorpus
