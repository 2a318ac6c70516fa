#include "medcorpus/artifact.hpp"

#include <sstream>

#include "medcorpus/error.hpp"

namespace medcorpus {

ordered_json ArtifactMeta::to_json() const {
  ordered_json j;
  j["kind"] = kind;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["layout_version"] = layout_version;
  return j;
}

ArtifactMeta ArtifactMeta::from_json(const json& j) {
  ArtifactMeta m;
  m.kind = j.value("kind", "");
  m.seed = j.value("seed", std::uint64_t{0});
  m.config_hash = j.value("config_hash", "");
  m.layout_version = j.value("layout_version", kLayoutVersion);
  return m;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, const ArtifactMeta& meta)
    : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorCode::Io, "cannot write " + path.string());
  ordered_json header;
  header["_meta"] = meta.to_json();
  out_ << header.dump() << '\n';
}

void JsonlWriter::write(const ordered_json& record) {
  out_ << record.dump() << '\n';
  ++count_;
}

void JsonlWriter::close() {
  out_.flush();
  if (!out_) throw Error(ErrorCode::Io, "write failed for " + path_.string());
  out_.close();
}

std::optional<ArtifactMeta> for_each_jsonl(const std::filesystem::path& path,
                                           const std::function<void(const json&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::optional<ArtifactMeta> meta;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Io,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (j.is_object() && j.contains("_meta")) {
      meta = ArtifactMeta::from_json(j["_meta"]);
      continue;
    }
    fn(j);
  }
  return meta;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_json_artifact(const std::filesystem::path& path, const ArtifactMeta& meta,
                         const ordered_json& body) {
  ordered_json doc;
  doc["_meta"] = meta.to_json();
  for (const auto& [k, v] : body.items()) doc[k] = v;
  write_text_file(path, doc.dump(2) + "\n");
}

}  // namespace medcorpus
