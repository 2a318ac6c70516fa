#include "medcorpus/pipeline.hpp"

#include <pthread.h>
#include <signal.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "medcorpus/composer.hpp"
#include "medcorpus/corpus.hpp"
#include "medcorpus/error.hpp"
#include "medcorpus/hashing.hpp"
#include "medcorpus/ingest.hpp"
#include "medcorpus/promptgen.hpp"
#include "medcorpus/review_server.hpp"
#include "medcorpus/trainplan.hpp"

namespace medcorpus {
namespace fs = std::filesystem;

namespace {

constexpr Stage kStages[] = {Stage::I, Stage::II, Stage::III};

fs::path resolve(const fs::path& base, const std::string& p) { return (base / p).lexically_normal(); }

CleanPolicy clean_policy_from_json(const json& j) {
  static const std::set<std::string> kKeys = {"min_box_area", "min_image_side", "unclear_labels"};
  CleanPolicy p;
  if (j.is_null()) return p;
  for (const auto& [k, _] : j.items()) {
    if (!kKeys.contains(k)) throw Error(ErrorCode::UnknownField, "clean_policy." + k);
  }
  p.min_box_area = j.value("min_box_area", p.min_box_area);
  p.min_image_side = j.value("min_image_side", p.min_image_side);
  if (j.contains("unclear_labels")) p.unclear_labels = j["unclear_labels"].get<std::set<std::string>>();
  return p;
}

std::string stage_file(Stage s, const char* suffix) { return "stage_" + std::string(to_string(s)) + suffix; }

/// Record count of a JSONL artifact, excluding the meta header.
std::uint64_t count_records(const fs::path& file) {
  std::uint64_t n = 0;
  for_each_jsonl(file, [&](const json&) { ++n; });
  return n;
}

std::vector<CanonicalRecord> read_canonical(const fs::path& file) {
  std::vector<CanonicalRecord> out;
  for_each_jsonl(file, [&](const json& j) { out.push_back(canonical_from_json(j)); });
  return out;
}

void replace_file(const fs::path& target, const std::function<void(const fs::path&)>& write) {
  const fs::path tmp = target.string() + ".tmp";
  write(tmp);
  fs::rename(tmp, target);
}

/// Ledger lines keyed by request id. A torn final line (interrupted write)
/// is ignored; damage anywhere else is an error.
std::map<std::string, GenerationResult> read_ledger(const fs::path& file) {
  std::map<std::string, GenerationResult> out;
  if (!fs::exists(file)) return out;
  std::ifstream in(file, std::ios::binary);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json j;
    try {
      j = json::parse(lines[i]);
      if (j.contains("_meta")) continue;
      auto r = GenerationResult::from_json(j);
      out.insert_or_assign(r.request_id, std::move(r));
    } catch (const std::exception& e) {
      if (i + 1 == lines.size()) break;
      throw Error(ErrorCode::Io, file.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

PlanStage plan_stage(const RunConfig& cfg, Stage stage, const fs::path& files_dir,
                     const std::map<Stage, json>& overrides) {
  PlanStage ps;
  ps.config = stage_config(stage);
  if (const auto it = overrides.find(stage); it != overrides.end()) {
    ps.deviations = apply_overrides(ps.config, it->second);
  }
  const auto manifest = files_dir / stage_file(stage, ".manifest.jsonl");
  const auto packed = files_dir / stage_file(stage, ".packed.jsonl");
  ps.manifest_path = "compose/" + stage_file(stage, ".manifest.jsonl");
  ps.manifest_sha256 = sha256_file_hex(manifest);
  ps.manifest_samples = count_records(manifest);
  ps.packed_path = "compose/" + stage_file(stage, ".packed.jsonl");
  ps.packed_sha256 = sha256_file_hex(packed);
  ps.packed_sequences = count_records(packed);
  ps.packing_budget = cfg.packing_budget(stage);
  return ps;
}

std::map<Stage, json> plan_overrides(const RunConfig& cfg) {
  return cfg.train_overrides ? load_override_file(*cfg.train_overrides) : std::map<Stage, json>{};
}

}  // namespace

// ---------------------------------------------------------------- config

RunConfig RunConfig::from_json(const json& doc, const fs::path& config_dir) {
  static const std::set<std::string> kKeys = {
      "registry_dir", "output_dir",           "seed",        "templates_dir",   "format_recipe", "mix_table",
      "train_overrides", "clean_policy",      "client",      "translation_fraction", "packing_budgets",
      "review",       "review_server"};
  if (!doc.is_object()) throw Error(ErrorCode::Config, "run config must be a JSON object");
  for (const auto& [k, _] : doc.items()) {
    if (!kKeys.contains(k)) throw Error(ErrorCode::UnknownField, "run config: " + k);
  }
  RunConfig c;
  try {
    for (const char* key : {"registry_dir", "output_dir", "seed", "templates_dir", "format_recipe", "mix_table"}) {
      if (!doc.contains(key)) throw Error(ErrorCode::MissingField, std::string("run config: ") + key);
    }
    c.registry_dir = resolve(config_dir, doc["registry_dir"].get<std::string>());
    c.output_dir = resolve(config_dir, doc["output_dir"].get<std::string>());
    c.seed = doc["seed"].get<std::uint64_t>();
    c.templates_dir = resolve(config_dir, doc["templates_dir"].get<std::string>());
    c.format_recipe = resolve(config_dir, doc["format_recipe"].get<std::string>());
    c.mix_table = resolve(config_dir, doc["mix_table"].get<std::string>());
    if (doc.contains("train_overrides") && !doc["train_overrides"].is_null()) {
      c.train_overrides = resolve(config_dir, doc["train_overrides"].get<std::string>());
    }
    c.clean_policy = clean_policy_from_json(doc.value("clean_policy", json()));
    c.client = ClientConfig::from_json(doc.value("client", json::object()));
    c.translation_fraction = doc.value("translation_fraction", 0.0);
    if (!(c.translation_fraction >= 0.0 && c.translation_fraction <= 1.0)) {
      throw Error(ErrorCode::Config, "translation_fraction outside [0,1]");
    }
    for (Stage s : kStages) c.packing_budgets[s] = kDefaultPackBudget;
    if (doc.contains("packing_budgets")) {
      for (const auto& [k, v] : doc["packing_budgets"].items()) {
        const auto b = v.get<std::uint64_t>();
        if (b < 1) throw Error(ErrorCode::Config, "packing budget must be >= 1");
        c.packing_budgets[parse_stage(k)] = b;
      }
    }
    c.review = ReviewPolicy::from_json(doc.value("review", json()), derive_seed(c.seed, "review"));
    if (doc.contains("review_server")) {
      c.review_host = doc["review_server"].value("host", c.review_host);
      c.review_port = doc["review_server"].value("port", c.review_port);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("run config: ") + e.what());
  }
  c.document = doc;
  return c;
}

RunConfig RunConfig::load(const fs::path& file, std::optional<std::uint64_t> seed_override,
                          std::optional<fs::path> output_override) {
  json doc;
  try {
    doc = json::parse(read_text_file(file));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, file.string() + ": " + e.what());
  }
  if (seed_override && doc.is_object()) doc["seed"] = *seed_override;
  const auto dir = fs::absolute(file).parent_path();
  RunConfig c = from_json(doc, dir);
  if (output_override) c.output_dir = fs::absolute(*output_override).lexically_normal();
  return c;
}

std::string RunConfig::config_hash() const {
  json doc = document;
  doc.erase("output_dir");
  return sha256_hex(doc.dump());
}

ArtifactMeta RunConfig::meta(const std::string& kind) const { return {kind, seed, config_hash(), kLayoutVersion}; }

std::uint64_t RunConfig::packing_budget(Stage s) const {
  const auto it = packing_budgets.find(s);
  return it == packing_budgets.end() ? kDefaultPackBudget : it->second;
}

// ---------------------------------------------------------------- ingest

int cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  const auto registry = load_registry(cfg.registry_dir);
  if (registry.empty()) log << "warning: no dataset descriptors in " << cfg.registry_dir.string() << "\n";

  const auto dir = cfg.output_dir / "canonical";
  fs::create_directories(dir);
  JsonlWriter records(dir / "records.jsonl", cfg.meta("canonical-records"));
  JsonlWriter rejections(dir / "rejections.jsonl", cfg.meta("rejections"));
  std::set<std::string> seen;
  ordered_json datasets = ordered_json::array();

  for (const auto& desc : registry) {
    const auto loaded = load_records(desc);
    std::size_t kept = 0;
    std::map<std::string, std::size_t> reasons;
    auto reject = [&](const Rejection& r) {
      rejections.write(r.to_json());
      ++reasons[std::string(to_string(r.reason))];
    };
    for (const auto& raw : loaded.records) {
      auto cleaned = clean(raw, desc, cfg.clean_policy);
      for (const auto& r : cleaned.rejections) reject(r);
      for (const auto& rec : cleaned.records) {
        if (!seen.insert(rec.record_id).second) {
          reject({rec.source_dataset, rec.image_ref, rec.label, RejectReason::DuplicateRecord, rec.record_id});
          continue;
        }
        const auto j = to_json(rec);
        if (const auto v = canonical_schema_violation(json::parse(j.dump()))) {
          throw Error(ErrorCode::SchemaViolation, rec.record_id + ": " + *v);
        }
        records.write(j);
        ++kept;
      }
    }
    ordered_json skipped = ordered_json::array();
    for (const auto& s : loaded.skipped) skipped.push_back({{"line", s.line}, {"image", s.image}, {"reason", s.reason}});
    datasets.push_back({{"dataset_id", desc.dataset_id},
                        {"annotation_units", loaded.rows},
                        {"records", kept},
                        {"rejections", reasons},
                        {"skipped_rows", skipped}});
    log << desc.dataset_id << ": " << kept << " records, " << loaded.skipped.size() << " rows skipped\n";
  }
  records.close();
  rejections.close();
  write_json_artifact(dir / "ingest_report.json", cfg.meta("ingest-report"),
                      {{"datasets", datasets}, {"records", records.count()}, {"rejections", rejections.count()}});
  log << "ingest: " << records.count() << " canonical records, " << rejections.count() << " rejections\n";
  return kExitOk;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const RunConfig& cfg, const GenerateOptions& opts, std::ostream& log) {
  const auto canonical = cfg.output_dir / "canonical" / "records.jsonl";
  if (!fs::exists(canonical)) throw Error(ErrorCode::Io, canonical.string() + " not found; run ingest first");
  const auto records = read_canonical(canonical);
  std::map<std::string, const CanonicalRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.record_id, &r);

  const auto templates = load_templates(cfg.templates_dir);
  json recipe_doc;
  try {
    recipe_doc = json::parse(read_text_file(cfg.format_recipe));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, cfg.format_recipe.string() + ": " + e.what());
  }
  const auto recipe = FormatRecipe::from_json(recipe_doc);
  LabelVocabulary vocab;
  for (const auto& r : records) vocab.add(r);
  const PlanContext ctx{&templates, &vocab, derive_seed(cfg.seed, "promptgen"), Language::en};

  std::vector<GenerationRequest> requests;
  for (const auto& r : records) {
    auto rs = plan_requests(r, recipe, ctx);
    requests.insert(requests.end(), std::make_move_iterator(rs.begin()), std::make_move_iterator(rs.end()));
  }

  const auto dir = cfg.output_dir / "generation";
  fs::create_directories(dir);
  replace_file(dir / "requests.jsonl", [&](const fs::path& p) {
    JsonlWriter w(p, cfg.meta("generation-requests"));
    for (const auto& q : requests) w.write(q.to_json());
    w.close();
  });

  const auto ledger_path = dir / "ledger.jsonl";
  auto ledger = read_ledger(ledger_path);
  std::vector<GenerationRequest> pending;
  for (const auto& q : requests) {
    if (!ledger.contains(q.request_id)) pending.push_back(q);
  }
  const std::size_t pending_total = pending.size();
  if (opts.max_requests && pending.size() > *opts.max_requests) pending.resize(*opts.max_requests);
  log << "generate: " << requests.size() << " requests, " << (requests.size() - pending_total)
      << " already answered, " << pending.size() << " to send\n";

  ClientConfig client_cfg = cfg.client;
  if (opts.backend) client_cfg.backend = *opts.backend;
  Clock& clock = opts.clock ? *opts.clock : SteadyClock::instance();
  GenerationClient client(client_cfg, make_backend(client_cfg, cfg.registry_dir), clock);

  std::ofstream ledger_out;
  auto append = [&](const GenerationResult& r) {
    if (!ledger_out.is_open()) {
      const bool fresh = !fs::exists(ledger_path);
      ledger_out.open(ledger_path, std::ios::app | std::ios::binary);
      if (fresh) ledger_out << ordered_json{{"_meta", cfg.meta("generation-ledger").to_json()}}.dump() << "\n";
    }
    ledger_out << r.to_json().dump() << "\n";
    ledger_out.flush();
  };

  ordered_json failures = ordered_json::array();
  ordered_json dropped = ordered_json::array();
  const auto outcomes = client.generate_all(pending, [&](std::size_t, const GenerationClient::Outcome& o) {
    if (o.result) append(*o.result);
  });
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].result) {
      ledger.insert_or_assign(pending[i].request_id, *outcomes[i].result);
    } else {
      failures.push_back({{"request_id", pending[i].request_id},
                          {"error", error_code_name(outcomes[i].error->code())},
                          {"detail", outcomes[i].error->detail()}});
    }
  }

  auto write_failures = [&](bool complete) {
    replace_file(dir / "failures.json", [&](const fs::path& p) {
      write_json_artifact(p, cfg.meta("generation-failures"),
                          {{"complete", complete}, {"failures", failures}, {"dropped", dropped}});
    });
  };

  if (pending.size() < pending_total) {
    ledger_out.close();
    write_failures(false);
    log << "generate: stopped with " << (pending_total - pending.size())
        << " requests unsent; rerun to resume from the ledger\n";
    return kExitPartial;
  }

  // Assemble English samples in request order.
  std::vector<InstructionSample> english;
  for (const auto& q : requests) {
    const auto it = ledger.find(q.request_id);
    if (it == ledger.end()) continue;
    // Refused, truncated and unparseable results are dropped and reported, not failures.
    if (it->second.finish_reason != FinishReason::ok) {
      dropped.push_back({{"request_id", q.request_id}, {"reason", to_string(it->second.finish_reason)}});
      continue;
    }
    try {
      english.push_back(assemble(q, it->second, *by_id.at(q.record_id)));
    } catch (const Error& e) {
      dropped.push_back({{"request_id", q.request_id}, {"reason", error_code_name(e.code())}, {"detail", e.detail()}});
    }
  }

  // Translation pass: exact-fraction seeded selection, one call per message.
  const auto chosen = select_for_translation(english.size(), cfg.translation_fraction, derive_seed(cfg.seed, "translate"));
  std::set<std::size_t> chosen_set(chosen.begin(), chosen.end());
  std::vector<std::string> translation_ids;
  std::vector<InstructionSample> samples;
  for (std::size_t i = 0; i < english.size(); ++i) {
    samples.push_back(english[i]);
    if (!chosen_set.contains(i)) continue;
    try {
      samples.push_back(translated_copy(english[i], [&](std::size_t m, const std::string& text) {
        const std::string id = "translate:" + english[i].sample_id + ":" + std::to_string(m);
        translation_ids.push_back(id);
        auto it = ledger.find(id);
        if (it == ledger.end()) {
          auto r = client.translate(id, text);
          append(r);
          it = ledger.insert_or_assign(id, std::move(r)).first;
        }
        return it->second.text;
      }));
    } catch (const Error& e) {
      failures.push_back({{"request_id", "translate:" + english[i].sample_id},
                          {"error", error_code_name(e.code())},
                          {"detail", e.detail()}});
    }
  }
  ledger_out.close();
  samples = dedup(samples);

  fs::create_directories(cfg.output_dir / "instruct");
  replace_file(cfg.output_dir / "instruct" / "corpus.jsonl",
               [&](const fs::path& p) { write_corpus(p, samples, cfg.meta("instruction-corpus")); });

  // Rewrite the ledger in request order so completed runs are byte-stable.
  replace_file(ledger_path, [&](const fs::path& p) {
    JsonlWriter w(p, cfg.meta("generation-ledger"));
    for (const auto& q : requests) {
      if (const auto it = ledger.find(q.request_id); it != ledger.end()) w.write(it->second.to_json());
    }
    for (const auto& id : translation_ids) w.write(ledger.at(id).to_json());
    w.close();
  });
  write_failures(true);
  log << "generate: " << samples.size() << " instruction samples (" << chosen.size() << " translated), "
      << failures.size() << " failures, " << dropped.size() << " dropped\n";
  return failures.empty() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------- compose / plan

int cmd_compose(const RunConfig& cfg, const ComposeOptions& opts, std::ostream& log) {
  const auto corpus_path = cfg.output_dir / "instruct" / "corpus.jsonl";
  if (!fs::exists(corpus_path)) throw Error(ErrorCode::Io, corpus_path.string() + " not found; run generate first");
  const auto corpus = read_corpus(corpus_path);
  std::map<std::string, const InstructionSample*> by_id;
  for (const auto& s : corpus) by_id.emplace(s.sample_id, &s);
  const auto index = CorpusIndex::from_corpus(corpus);
  const auto table = MixTable::load(cfg.mix_table);
  const auto overrides = plan_overrides(cfg);

  std::optional<std::map<std::string, RetentionDecision>> decisions;
  const auto decisions_path = cfg.output_dir / "review" / "decisions.json";
  if (fs::exists(decisions_path)) decisions = load_decisions(decisions_path);

  const auto final_dir = cfg.output_dir / "compose";
  const auto tmp_dir = cfg.output_dir / ".compose.tmp";
  fs::remove_all(tmp_dir);
  fs::create_directories(tmp_dir);

  ordered_json specs = ordered_json::array();
  std::vector<PlanStage> plan;
  for (Stage stage : kStages) {
    auto spec = stage_spec(table, stage, derive_seed(cfg.seed, stage == Stage::III ? "mix/stage-3" : "mix/stage-1-2"),
                           index);
    std::string source = "mix table";
    if (stage == Stage::III) {
      if (opts.no_review) {
        source = "mix table (review bypassed)";
      } else if (decisions) {
        spec = apply_retention(spec, *decisions);
        source = "mix table with retention decisions";
      } else {
        log << "notice: stage III skipped: no retention decisions at " << decisions_path.string()
            << " (run review-serve, or pass --no-review)\n";
        continue;
      }
    }
    const auto manifest = apply_mix(spec, index);
    write_manifest(tmp_dir / stage_file(stage, ".manifest.jsonl"), manifest, index,
                   cfg.meta("stage-manifest-" + std::string(to_string(stage))));
    std::vector<PackItem> items;
    for (const auto& [ds, id] : manifest.sample_ids(index)) items.push_back({id, token_len(*by_id.at(id))});
    const auto seqs = soft_pack(items, cfg.packing_budget(stage), "stage_" + std::string(to_string(stage)));
    write_packed(tmp_dir / stage_file(stage, ".packed.jsonl"), seqs,
                 cfg.meta("packed-" + std::string(to_string(stage))));
    auto sj = spec.to_json();
    sj["source"] = source;
    sj["total"] = manifest.total;
    specs.push_back(sj);
    plan.push_back(plan_stage(cfg, stage, tmp_dir, overrides));
    log << "stage " << to_string(stage) << ": " << manifest.total << " samples, " << seqs.size()
        << " packed sequences\n";
  }
  write_json_artifact(tmp_dir / "mix_specs.json", cfg.meta("mix-specs"), {{"stages", specs}});
  write_text_file(tmp_dir / "train_plan.json", emit_plan(plan, cfg.meta("train-plan")).dump(2) + "\n");

  fs::remove_all(final_dir);
  fs::rename(tmp_dir, final_dir);
  return kExitOk;
}

int cmd_plan(const RunConfig& cfg, std::ostream& log) {
  const auto compose_dir = cfg.output_dir / "compose";
  const auto overrides = plan_overrides(cfg);
  std::vector<PlanStage> plan;
  for (Stage stage : kStages) {
    if (!fs::exists(compose_dir / stage_file(stage, ".manifest.jsonl"))) continue;
    plan.push_back(plan_stage(cfg, stage, compose_dir, overrides));
  }
  if (plan.empty()) throw Error(ErrorCode::Io, "no stage manifests in " + compose_dir.string() + "; run compose first");
  const auto doc = emit_plan(plan, cfg.meta("train-plan"));
  fs::create_directories(cfg.output_dir / "plan");
  replace_file(cfg.output_dir / "plan" / "train_plan.json",
               [&](const fs::path& p) { write_text_file(p, doc.dump(2) + "\n"); });
  for (const auto& s : plan) {
    log << "stage " << to_string(s.config.stage) << ": lr " << s.config.base_lr << ", effective batch "
        << effective_batch(s.config) << ", " << s.manifest_samples << " samples, " << s.deviations.size()
        << " deviations\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- stats

int cmd_stats(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const auto corpus_path = cfg.output_dir / "instruct" / "corpus.jsonl";
  if (!fs::exists(corpus_path)) throw Error(ErrorCode::Io, corpus_path.string() + " not found; run generate first");
  const auto stats = compute_stats(read_corpus(corpus_path), load_registry(cfg.registry_dir));
  const auto dir = cfg.output_dir / "stats";
  fs::create_directories(dir);
  write_json_artifact(dir / "stats.json", cfg.meta("corpus-stats"), stats.to_json());
  const auto table = stats.render_table();
  const auto meta = cfg.meta("corpus-stats");
  const std::string stamp = "seed=" + std::to_string(meta.seed) + " config_hash=" + meta.config_hash +
                            " layout_version=" + std::to_string(meta.layout_version);
  write_text_file(dir / "stats.txt", "# " + stamp + "\n" + table);
  const std::pair<const char*, const CountTable*> charts[] = {
      {"modality", &stats.by_modality}, {"task", &stats.by_task},         {"department", &stats.by_department},
      {"format", &stats.by_format},     {"language", &stats.by_language},
  };
  for (const auto& [name, t] : charts) {
    auto svg = CorpusStats::render_svg(std::string("Samples by ") + name, *t);
    svg.insert(svg.find('>') + 1, "\n  <!-- " + stamp + " -->");
    write_text_file(dir / (std::string(name) + ".svg"), svg);
  }
  out << table;
  log << "stats written to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- review-serve

int cmd_review_serve(const RunConfig& cfg, int port_override, std::ostream& log) {
  const auto corpus_path = cfg.output_dir / "instruct" / "corpus.jsonl";
  if (!fs::exists(corpus_path)) throw Error(ErrorCode::Io, corpus_path.string() + " not found; run generate first");
  std::vector<std::string> names;
  for (const auto& d : load_registry(cfg.registry_dir)) names.push_back(d.dataset_id);
  const auto canonical = cfg.output_dir / "canonical" / "records.jsonl";
  ReviewService service(names, read_corpus(corpus_path),
                        fs::exists(canonical) ? read_canonical(canonical) : std::vector<CanonicalRecord>{},
                        cfg.review, cfg.output_dir / "review", cfg.config_hash());
  ReviewServer server(service, cfg.registry_dir);
  const int port = server.bind(cfg.review_host, port_override >= 0 ? port_override : cfg.review_port);

  // Block the shutdown signals in every thread; one thread waits for them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::atomic<bool> signalled{false};
  std::atomic<bool> finished{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    signalled = true;
    // A signal can land before the listener is up; keep asking until it stops.
    while (!finished) {
      server.stop();
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  });

  log << "review service listening on http://" << cfg.review_host << ":" << port << std::endl;
  server.serve();
  finished = true;
  if (!signalled) kill(getpid(), SIGTERM);  // release the waiter
  waiter.join();
  pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
  log << "review service stopped; events in " << service.events_path().string() << std::endl;
  return kExitOk;
}

}  // namespace medcorpus
