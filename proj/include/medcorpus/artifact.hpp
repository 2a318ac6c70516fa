#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

namespace medcorpus {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

inline constexpr int kLayoutVersion = 1;

/// Header record carried by every artifact the pipeline writes.
struct ArtifactMeta {
  std::string kind;
  std::uint64_t seed = 0;
  std::string config_hash;
  int layout_version = kLayoutVersion;

  ordered_json to_json() const;
  static ArtifactMeta from_json(const json& j);
};

/// Line-oriented writer; the first line is always {"_meta": {...}}.
class JsonlWriter {
 public:
  JsonlWriter(const std::filesystem::path& path, const ArtifactMeta& meta);

  void write(const ordered_json& record);
  std::size_t count() const noexcept { return count_; }
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

/// Calls `fn` for each record line, skipping the meta header and blank
/// lines. Returns the header when present. A malformed line throws an Io
/// error naming file and line.
std::optional<ArtifactMeta> for_each_jsonl(const std::filesystem::path& path,
                                           const std::function<void(const json&)>& fn);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

/// JSON document with a leading "_meta" member.
void write_json_artifact(const std::filesystem::path& path, const ArtifactMeta& meta,
                         const ordered_json& body);

}  // namespace medcorpus
