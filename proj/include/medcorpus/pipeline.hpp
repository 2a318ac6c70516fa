#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "medcorpus/artifact.hpp"
#include "medcorpus/canonicalize.hpp"
#include "medcorpus/genclient.hpp"
#include "medcorpus/review.hpp"
#include "medcorpus/types.hpp"

namespace medcorpus {

/// Run configuration. Relative paths resolve against the directory of the
/// config file.
///
/// Output layout (version kLayoutVersion):
///   canonical/  records.jsonl rejections.jsonl ingest_report.json
///   generation/ requests.jsonl ledger.jsonl failures.json
///   instruct/   corpus.jsonl
///   compose/    stage_<S>.manifest.jsonl stage_<S>.packed.jsonl mix_specs.json train_plan.json
///   plan/       train_plan.json
///   stats/      stats.json stats.txt <dimension>.svg
///   review/     events.jsonl decisions.json
struct RunConfig {
  std::filesystem::path registry_dir;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::filesystem::path templates_dir;
  std::filesystem::path format_recipe;
  std::filesystem::path mix_table;
  std::optional<std::filesystem::path> train_overrides;
  CleanPolicy clean_policy;
  ClientConfig client;
  double translation_fraction = 0.0;
  std::map<Stage, std::uint64_t> packing_budgets;
  ReviewPolicy review;
  std::string review_host = "127.0.0.1";
  int review_port = 8080;

  json document;  // the parsed config after overrides, used for the hash

  static RunConfig load(const std::filesystem::path& file, std::optional<std::uint64_t> seed_override = {},
                        std::optional<std::filesystem::path> output_override = {});
  static RunConfig from_json(const json& doc, const std::filesystem::path& config_dir);

  /// SHA-256 of the config with output_dir removed.
  std::string config_hash() const;
  ArtifactMeta meta(const std::string& kind) const;
  std::uint64_t packing_budget(Stage s) const;
};

/// Exit codes shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

struct GenerateOptions {
  std::optional<std::string> backend;  // overrides client.backend
  /// Stop after this many new backend requests (simulates an interrupted run).
  std::optional<std::size_t> max_requests;
  Clock* clock = nullptr;  // defaults to the steady clock
};

struct ComposeOptions {
  bool no_review = false;
};

int cmd_ingest(const RunConfig& cfg, std::ostream& log);
int cmd_generate(const RunConfig& cfg, const GenerateOptions& opts, std::ostream& log);
int cmd_compose(const RunConfig& cfg, const ComposeOptions& opts, std::ostream& log);
int cmd_plan(const RunConfig& cfg, std::ostream& log);
int cmd_stats(const RunConfig& cfg, std::ostream& out, std::ostream& log);
/// Serves until SIGINT/SIGTERM. `port_override` < 0 keeps the configured port.
int cmd_review_serve(const RunConfig& cfg, int port_override, std::ostream& log);

}  // namespace medcorpus
