#include "medcorpus/corpus.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "medcorpus/error.hpp"
#include "medcorpus/hashing.hpp"

namespace medcorpus {
namespace {

std::string_view role_name(Role r) { return r == Role::user ? "user" : "assistant"; }

Role parse_role(std::string_view s) {
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw Error(ErrorCode::InvalidField, "role '" + std::string(s) + "'");
}

std::string rstrip(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == '\r' || s.back() == '\t')) s.pop_back();
  return s;
}

std::string lstrip(std::string_view s) {
  const auto p = s.find_first_not_of(" \t");
  return p == std::string_view::npos ? std::string() : std::string(s.substr(p));
}

std::string user_question(const GenerationRequest& req, const CanonicalRecord& rec) {
  switch (req.format) {
    case InstructionFormat::image_caption:
      return "Please provide a detailed description of this medical image.";
    case InstructionFormat::region_caption:
      return "Please describe the region " + (rec.bbox ? to_string(*rec.bbox) : std::string()) +
             " of this image in detail.";
    case InstructionFormat::free_instruction:
      return "Analyze this image and explain its key clinical findings.";
    case InstructionFormat::text_only:
      return "Explain the clinical significance of " + rec.label + " in " + std::string(to_string(rec.modality)) +
             " imaging.";
    case InstructionFormat::dialogue:
    case InstructionFormat::visual_perception:
      break;
  }
  return {};
}

std::string serialize_messages(const std::vector<Message>& messages) {
  std::string out;
  for (const auto& m : messages) {
    out.append(role_name(m.role));
    out.push_back('\x1e');
    out.append(m.content);
    out.push_back('\x1d');
  }
  return out;
}

}  // namespace

ordered_json InstructionSample::to_json() const {
  ordered_json j;
  j["sample_id"] = sample_id;
  j["source_record_id"] = source_record_id;
  j["source_dataset"] = source_dataset;
  j["format"] = to_string(format);
  j["language"] = to_string(language);
  j["image_ref"] = image_ref ? ordered_json(*image_ref) : ordered_json(nullptr);
  ordered_json msgs = ordered_json::array();
  for (const auto& m : messages) msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  j["messages"] = msgs;
  j["quality_flag"] = quality_flag ? ordered_json(to_string(*quality_flag)) : ordered_json(nullptr);
  return j;
}

InstructionSample InstructionSample::from_json(const json& j) {
  InstructionSample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.source_record_id = j.at("source_record_id").get<std::string>();
  s.source_dataset = j.at("source_dataset").get<std::string>();
  s.format = parse_format(j.at("format").get<std::string>());
  s.language = parse_language(j.at("language").get<std::string>());
  if (!j.at("image_ref").is_null()) s.image_ref = j["image_ref"].get<std::string>();
  for (const auto& m : j.at("messages")) {
    s.messages.push_back({parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  }
  if (j.contains("quality_flag") && !j["quality_flag"].is_null()) {
    s.quality_flag = parse_verdict(j["quality_flag"].get<std::string>());
  }
  return s;
}

std::optional<std::string> sample_violation(const InstructionSample& s) {
  if (s.messages.empty()) return "no messages";
  for (std::size_t i = 0; i < s.messages.size(); ++i) {
    const Role expect = i % 2 == 0 ? Role::user : Role::assistant;
    if (s.messages[i].role != expect) return "messages must alternate starting with user";
  }
  if (s.messages.size() % 2 != 0) return "conversation must end with an assistant message";
  if (s.format == InstructionFormat::dialogue) {
    if (s.messages.size() < 4) return "dialogue needs at least two turns per role";
  } else if (s.messages.size() != 2) {
    return "non-dialogue formats carry exactly one user and one assistant message";
  }
  if ((s.format == InstructionFormat::text_only) == s.image_ref.has_value()) {
    return "image_ref must be absent exactly for text_only";
  }
  if (s.source_dataset.empty() || s.source_record_id.empty()) return "missing provenance";
  return std::nullopt;
}

std::vector<Message> parse_dialogue(std::string_view text) {
  std::vector<Message> turns;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto body = lstrip(line);
    std::optional<Role> marker;
    if (body.rfind("Q:", 0) == 0) marker = Role::user;
    if (body.rfind("A:", 0) == 0) marker = Role::assistant;
    if (marker) {
      const Role expect = turns.size() % 2 == 0 ? Role::user : Role::assistant;
      if (*marker != expect) throw Error(ErrorCode::DialogueParse, "turn markers do not alternate Q/A");
      turns.push_back({*marker, lstrip(std::string_view(body).substr(2))});
    } else if (!turns.empty()) {
      turns.back().content += "\n" + line;
    } else if (!lstrip(line).empty()) {
      throw Error(ErrorCode::DialogueParse, "text before the first Q: marker");
    }
  }
  for (auto& t : turns) {
    t.content = rstrip(t.content);
    if (t.content.empty()) throw Error(ErrorCode::DialogueParse, "empty turn");
  }
  if (turns.size() % 2 != 0) throw Error(ErrorCode::DialogueParse, "dialogue ends with an unanswered question");
  if (turns.size() < 4) throw Error(ErrorCode::DialogueParse, "dialogue needs at least two Q/A pairs");
  return turns;
}

InstructionSample assemble(const GenerationRequest& req, const GenerationResult& res, const CanonicalRecord& rec) {
  if (res.request_id != req.request_id) throw Error(ErrorCode::InvalidArgument, "result does not answer request " + req.request_id);
  if (res.finish_reason != FinishReason::ok) {
    throw Error(ErrorCode::InvalidArgument, "result " + res.request_id + " finished " + std::string(to_string(res.finish_reason)));
  }
  InstructionSample s;
  s.source_record_id = rec.record_id;
  s.source_dataset = rec.source_dataset;
  s.format = req.format;
  s.language = req.target_language;
  s.image_ref = req.image_ref;
  s.sample_id = digest_fields({req.request_id, to_string(s.language)});

  switch (req.format) {
    case InstructionFormat::dialogue:
      s.messages = parse_dialogue(res.text);
      break;
    case InstructionFormat::visual_perception: {
      if (!req.mcq) throw Error(ErrorCode::InvalidArgument, "visual_perception request without a question");
      const auto& q = *req.mcq;
      const std::string letter(1, static_cast<char>('A' + q.answer_index));
      s.messages = {{Role::user, q.render() + "\nAnswer with the option letter."},
                    {Role::assistant, letter + ". " + q.options[q.answer_index] + "\n" + res.text}};
      break;
    }
    default:
      s.messages = {{Role::user, user_question(req, rec)}, {Role::assistant, res.text}};
      break;
  }
  return s;
}

InstructionSample translated_copy(const InstructionSample& s,
                                  const std::function<std::string(std::size_t, const std::string&)>& translate) {
  InstructionSample out = s;
  out.language = Language::zh;
  out.sample_id = digest_fields({s.sample_id, "zh"});
  for (std::size_t i = 0; i < out.messages.size(); ++i) out.messages[i].content = translate(i, s.messages[i].content);
  return out;
}

std::string dedup_key(const InstructionSample& s) {
  return digest_fields({s.source_record_id, to_string(s.format), to_string(s.language),
                        sha256_hex(serialize_messages(s.messages))});
}

std::vector<InstructionSample> dedup(const std::vector<InstructionSample>& samples) {
  std::set<std::string> seen;
  std::vector<InstructionSample> out;
  for (const auto& s : samples) {
    if (seen.insert(dedup_key(s)).second) out.push_back(s);
  }
  return out;
}

std::vector<InstructionSample> read_corpus(const std::filesystem::path& file) {
  std::vector<InstructionSample> out;
  for_each_jsonl(file, [&](const json& j) { out.push_back(InstructionSample::from_json(j)); });
  return out;
}

void write_corpus(const std::filesystem::path& file, const std::vector<InstructionSample>& samples,
                  const ArtifactMeta& meta) {
  JsonlWriter w(file, meta);
  for (const auto& s : samples) w.write(s.to_json());
  w.close();
}

void CountTable::merge(const CountTable& other) {
  for (const auto& [k, v] : other.counts_) counts_[k] += v;
}

std::uint64_t CountTable::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0},
                         [](std::uint64_t acc, const auto& kv) { return acc + kv.second; });
}

std::map<std::string, int> CountTable::percent_tenths() const {
  std::map<std::string, int> out;
  const auto total_count = total();
  if (total_count == 0) return out;
  struct Share {
    std::string label;
    std::uint64_t remainder;
  };
  std::vector<Share> shares;
  int assigned = 0;
  for (const auto& [label, c] : counts_) {
    const std::uint64_t scaled = c * 1000;
    out[label] = static_cast<int>(scaled / total_count);
    assigned += out[label];
    shares.push_back({label, scaled % total_count});
  }
  std::stable_sort(shares.begin(), shares.end(),
                   [](const Share& a, const Share& b) { return a.remainder > b.remainder; });
  for (std::size_t i = 0; assigned < 1000; ++i, ++assigned) out[shares[i].label] += 1;
  return out;
}

void CorpusStats::merge(const CorpusStats& other) {
  total += other.total;
  by_modality.merge(other.by_modality);
  by_task.merge(other.by_task);
  by_department.merge(other.by_department);
  by_format.merge(other.by_format);
  by_language.merge(other.by_language);
}

namespace {

ordered_json table_json(const CountTable& t) {
  ordered_json j = ordered_json::object();
  const auto pct = t.percent_tenths();
  for (const auto& [label, c] : t.counts()) {
    j[label] = {{"count", c}, {"percent", pct.at(label) / 10.0}};
  }
  return j;
}

std::string format_tenths(int tenths) {
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

ordered_json CorpusStats::to_json() const {
  ordered_json j;
  j["total"] = total;
  j["by_modality"] = table_json(by_modality);
  j["by_task"] = table_json(by_task);
  j["by_department"] = table_json(by_department);
  j["by_format"] = table_json(by_format);
  j["by_language"] = table_json(by_language);
  return j;
}

std::string CorpusStats::render_table() const {
  std::ostringstream os;
  os << "total samples: " << total << "\n";
  const std::pair<const char*, const CountTable*> tables[] = {
      {"modality", &by_modality}, {"task", &by_task},         {"department", &by_department},
      {"format", &by_format},     {"language", &by_language},
  };
  for (const auto& [name, table] : tables) {
    os << "\n[" << name << "]\n";
    const auto pct = table->percent_tenths();
    for (const auto& [label, c] : table->counts()) {
      os << "  " << std::left << std::setw(24) << label << std::right << std::setw(10) << c << std::setw(8)
         << format_tenths(pct.at(label)) << "%\n";
    }
  }
  return os.str();
}

std::string CorpusStats::render_svg(const std::string& title, const CountTable& table) {
  constexpr int kRow = 22;
  constexpr int kLabelWidth = 200;
  constexpr int kBarWidth = 400;
  const auto pct = table.percent_tenths();
  std::uint64_t max_count = 1;
  for (const auto& [_, c] : table.counts()) max_count = std::max(max_count, c);
  const int height = 40 + kRow * static_cast<int>(table.counts().size());
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLabelWidth + kBarWidth + 120 << "\" height=\""
     << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "  <text x=\"10\" y=\"20\" font-weight=\"bold\">" << xml_escape(title) << "</text>\n";
  int y = 32;
  for (const auto& [label, c] : table.counts()) {
    const int w = static_cast<int>(kBarWidth * c / max_count);
    os << "  <text x=\"10\" y=\"" << y + 14 << "\">" << xml_escape(label) << "</text>\n";
    os << "  <rect x=\"" << kLabelWidth << "\" y=\"" << y + 3 << "\" width=\"" << w
       << "\" height=\"14\" fill=\"#4a7ab5\"/>\n";
    os << "  <text x=\"" << kLabelWidth + w + 6 << "\" y=\"" << y + 14 << "\">" << c << " ("
       << format_tenths(pct.at(label)) << "%)</text>\n";
    y += kRow;
  }
  os << "</svg>\n";
  return os.str();
}

CorpusStats compute_stats(const std::vector<InstructionSample>& corpus, const std::vector<DatasetDescriptor>& registry) {
  std::map<std::string, const DatasetDescriptor*> by_id;
  for (const auto& d : registry) by_id.emplace(d.dataset_id, &d);
  CorpusStats st;
  for (const auto& s : corpus) {
    const auto it = by_id.find(s.source_dataset);
    if (it == by_id.end()) throw Error(ErrorCode::UnknownDataset, s.source_dataset);
    const DatasetDescriptor& d = *it->second;
    ++st.total;
    st.by_modality.add(std::string(to_string(d.modality)));
    st.by_task.add(std::string(to_string(d.task_kind)));
    if (d.department) st.by_department.add(*d.department);
    st.by_format.add(std::string(to_string(s.format)));
    st.by_language.add(std::string(to_string(s.language)));
  }
  return st;
}

}  // namespace medcorpus
