#include "medcorpus/promptgen.hpp"

#include <algorithm>
#include <sstream>

#include "csv.hpp"
#include "medcorpus/error.hpp"
#include "medcorpus/hashing.hpp"
#include "medcorpus/rng.hpp"

namespace medcorpus {
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxDistractors = 4;

bool is_placeholder_name(std::string_view name) {
  return std::find(kPlaceholders.begin(), kPlaceholders.end(), name) != kPlaceholders.end();
}

// Segment of a template body: literal text, a placeholder, or an optional
// clause containing literals and placeholders.
struct Piece {
  enum Kind { literal, placeholder } kind;
  std::string text;
};
struct Segment {
  bool optional = false;
  std::vector<Piece> pieces;
};

std::vector<Piece> lex_pieces(std::string_view text, const std::string& template_id) {
  std::vector<Piece> pieces;
  std::string lit;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '{') {
      const auto close = text.find('}', i);
      if (close == std::string_view::npos) {
        throw Error(ErrorCode::TemplateInvalid, template_id + ": unterminated placeholder");
      }
      const std::string name(text.substr(i + 1, close - i - 1));
      if (!is_placeholder_name(name)) {
        throw Error(ErrorCode::TemplateInvalid, template_id + ": unknown placeholder {" + name + "}");
      }
      if (!lit.empty()) pieces.push_back({Piece::literal, std::move(lit)});
      lit.clear();
      pieces.push_back({Piece::placeholder, name});
      i = close;
    } else if (c == '}') {
      throw Error(ErrorCode::TemplateInvalid, template_id + ": stray '}'");
    } else {
      lit.push_back(c);
    }
  }
  if (!lit.empty()) pieces.push_back({Piece::literal, std::move(lit)});
  return pieces;
}

std::vector<Segment> lex_body(std::string_view body, const std::string& template_id) {
  std::vector<Segment> segments;
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto open = body.find("[[", pos);
    const auto plain_end = open == std::string_view::npos ? body.size() : open;
    if (body.substr(pos, plain_end - pos).find("]]") != std::string_view::npos) {
      throw Error(ErrorCode::TemplateInvalid, template_id + ": ']]' without '[['");
    }
    if (plain_end > pos) segments.push_back({false, lex_pieces(body.substr(pos, plain_end - pos), template_id)});
    if (open == std::string_view::npos) break;
    const auto close = body.find("]]", open + 2);
    if (close == std::string_view::npos) {
      throw Error(ErrorCode::TemplateInvalid, template_id + ": unterminated optional clause");
    }
    const auto inner = body.substr(open + 2, close - open - 2);
    if (inner.find("[[") != std::string_view::npos) {
      throw Error(ErrorCode::TemplateInvalid, template_id + ": nested optional clause");
    }
    segments.push_back({true, lex_pieces(inner, template_id)});
    pos = close + 2;
  }
  return segments;
}

std::string letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

}  // namespace

PromptTemplate parse_template(const std::string& template_id, std::string_view text) {
  PromptTemplate tmpl;
  tmpl.template_id = template_id;

  std::istringstream in{std::string(text)};
  std::string line;
  bool have_format = false;
  bool in_body = false;
  std::string body;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (in_body) {
      body += line;
      body += '\n';
      continue;
    }
    if (line == "---") {
      in_body = true;
      continue;
    }
    if (csv::trim(line).empty() || line.front() == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::TemplateInvalid, template_id + ": bad header line '" + line + "'");
    const auto key = csv::trim(std::string_view(line).substr(0, colon));
    const auto value = csv::trim(std::string_view(line).substr(colon + 1));
    if (key == "format") {
      try {
        tmpl.format = parse_format(value);
      } catch (const Error&) {
        throw Error(ErrorCode::TemplateInvalid, template_id + ": unknown format '" + value + "'");
      }
      have_format = true;
    } else if (key == "required") {
      std::size_t start = 0;
      while (start <= value.size()) {
        const auto comma = value.find(',', start);
        auto name = csv::trim(std::string_view(value).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!name.empty()) {
          if (!is_placeholder_name(name)) throw Error(ErrorCode::TemplateInvalid, template_id + ": unknown required field '" + name + "'");
          tmpl.required_fields.insert(name);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    } else {
      throw Error(ErrorCode::TemplateInvalid, template_id + ": unknown header key '" + key + "'");
    }
  }
  if (!in_body) throw Error(ErrorCode::TemplateInvalid, template_id + ": missing '---' body separator");
  if (!have_format) throw Error(ErrorCode::TemplateInvalid, template_id + ": missing format header");
  while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
  if (body.empty()) throw Error(ErrorCode::TemplateInvalid, template_id + ": empty body");
  tmpl.body = body;

  std::set<std::string> unconditional;
  for (const auto& seg : lex_body(tmpl.body, template_id)) {
    for (const auto& p : seg.pieces) {
      if (p.kind != Piece::placeholder) continue;
      if (seg.optional) {
        if (!tmpl.required_fields.contains(p.text)) tmpl.optional_fields.insert(p.text);
      } else {
        if (!tmpl.required_fields.contains(p.text)) {
          throw Error(ErrorCode::TemplateInvalid,
                      template_id + ": {" + p.text + "} is neither required nor inside an optional clause");
        }
        unconditional.insert(p.text);
      }
    }
  }
  for (const char* field : {"modality", "label"}) {
    if (!unconditional.contains(field)) {
      throw Error(ErrorCode::TemplateInvalid,
                  template_id + ": annotation-guided templates must always embed {" + field + "}");
    }
  }
  if (tmpl.format == InstructionFormat::region_caption && !unconditional.contains("bbox")) {
    throw Error(ErrorCode::TemplateInvalid, template_id + ": region_caption requires {bbox}");
  }
  if (tmpl.format == InstructionFormat::image_caption && tmpl.body.find("{bbox}") != std::string::npos) {
    throw Error(ErrorCode::TemplateInvalid, template_id + ": image_caption must not reference {bbox}");
  }
  return tmpl;
}

std::map<std::string, PromptTemplate> load_templates(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "template directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, PromptTemplate> out;
  for (const auto& f : files) {
    const auto id = f.stem().string();
    out.emplace(id, parse_template(id, read_text_file(f)));
  }
  return out;
}

std::string render_template(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values) {
  for (const auto& field : tmpl.required_fields) {
    if (!values.contains(field)) throw Error(ErrorCode::MissingRequiredField, field);
  }
  std::string out;
  for (const auto& seg : lex_body(tmpl.body, tmpl.template_id)) {
    if (seg.optional) {
      const bool complete = std::all_of(seg.pieces.begin(), seg.pieces.end(), [&](const Piece& p) {
        return p.kind == Piece::literal || values.contains(p.text);
      });
      if (!complete) continue;
    }
    for (const auto& p : seg.pieces) out += p.kind == Piece::literal ? p.text : values.at(p.text);
  }
  return out;
}

std::string MultipleChoice::render() const {
  std::string out = question;
  for (std::size_t i = 0; i < options.size(); ++i) out += "\n" + letter(i) + ". " + options[i];
  return out;
}

ordered_json MultipleChoice::to_json() const {
  ordered_json j;
  j["question"] = question;
  j["options"] = options;
  j["answer_index"] = answer_index;
  return j;
}

MultipleChoice MultipleChoice::from_json(const json& j) {
  MultipleChoice m;
  m.question = j.at("question").get<std::string>();
  m.options = j.at("options").get<std::vector<std::string>>();
  m.answer_index = j.at("answer_index").get<std::size_t>();
  return m;
}

ordered_json GenerationRequest::to_json() const {
  ordered_json j;
  j["request_id"] = request_id;
  j["record_id"] = record_id;
  j["format"] = to_string(format);
  j["prompt_text"] = prompt_text;
  j["image_ref"] = image_ref ? ordered_json(*image_ref) : ordered_json(nullptr);
  j["target_language"] = to_string(target_language);
  j["template_id"] = template_id;
  j["label"] = label;
  j["source_dataset"] = source_dataset;
  j["sequence"] = sequence;
  j["mcq"] = mcq ? mcq->to_json() : ordered_json(nullptr);
  return j;
}

GenerationRequest GenerationRequest::from_json(const json& j) {
  GenerationRequest r;
  r.request_id = j.at("request_id").get<std::string>();
  r.record_id = j.at("record_id").get<std::string>();
  r.format = parse_format(j.at("format").get<std::string>());
  r.prompt_text = j.at("prompt_text").get<std::string>();
  if (!j.at("image_ref").is_null()) r.image_ref = j["image_ref"].get<std::string>();
  r.target_language = parse_language(j.at("target_language").get<std::string>());
  r.template_id = j.value("template_id", "");
  r.label = j.value("label", "");
  r.source_dataset = j.value("source_dataset", "");
  r.sequence = j.value("sequence", 0);
  if (j.contains("mcq") && !j["mcq"].is_null()) r.mcq = MultipleChoice::from_json(j["mcq"]);
  return r;
}

std::string request_id_for(const std::string& record_id, const std::string& template_id, Language lang,
                           int sequence) {
  if (sequence == 0) return digest_fields({record_id, template_id, to_string(lang)});
  return digest_fields({record_id, template_id, to_string(lang), std::to_string(sequence)});
}

GenerationRequest build_request(const CanonicalRecord& rec, const PromptTemplate& tmpl, Language lang,
                                int sequence) {
  std::map<std::string, std::string> values;
  values["modality"] = std::string(to_string(rec.modality));
  values["label"] = rec.label;
  values["language"] = std::string(language_display_name(lang));
  if (rec.department) values["department"] = *rec.department;
  if (rec.bbox) values["bbox"] = to_string(*rec.bbox);

  GenerationRequest req;
  req.prompt_text = render_template(tmpl, values);
  req.record_id = rec.record_id;
  req.format = tmpl.format;
  req.target_language = lang;
  req.template_id = tmpl.template_id;
  req.label = rec.label;
  req.source_dataset = rec.source_dataset;
  req.sequence = sequence;
  req.request_id = request_id_for(rec.record_id, tmpl.template_id, lang, sequence);
  if (tmpl.format != InstructionFormat::text_only) req.image_ref = rec.image_ref;
  return req;
}

MultipleChoice build_vp_question(const CanonicalRecord& rec, const std::vector<std::string>& distractors,
                                 std::uint64_t seed) {
  if (distractors.empty()) throw Error(ErrorCode::NoDistractors, "label '" + rec.label + "'");
  for (const auto& d : distractors) {
    if (d == rec.label) throw Error(ErrorCode::DistractorCollision, "distractor equals label '" + d + "'");
  }
  MultipleChoice mcq;
  mcq.question = "Which of the following is shown ";
  mcq.question += rec.bbox ? "in the region " + to_string(*rec.bbox) + " of this " : "in this ";
  mcq.question += std::string(to_string(rec.modality)) + " image?";

  const std::size_t k = std::min(kMaxDistractors, distractors.size());
  mcq.options.assign(distractors.begin(), distractors.begin() + static_cast<std::ptrdiff_t>(k));
  mcq.options.push_back(rec.label);
  SeededRng rng(seed);
  rng.shuffle(std::span<std::string>(mcq.options));
  mcq.answer_index = static_cast<std::size_t>(
      std::find(mcq.options.begin(), mcq.options.end(), rec.label) - mcq.options.begin());
  return mcq;
}

FormatRecipe FormatRecipe::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "recipe must be a JSON object");
  FormatRecipe r;
  for (const auto& [key, value] : j.items()) {
    InstructionFormat f;
    try {
      f = parse_format(key);
    } catch (const Error&) {
      throw Error(ErrorCode::Config, "recipe: unknown format '" + key + "'");
    }
    if (!value.is_object() || !value.contains("template_id") || !value["template_id"].is_string()) {
      throw Error(ErrorCode::Config, "recipe: '" + key + "' needs a template_id");
    }
    RecipeEntry e;
    e.template_id = value["template_id"].get<std::string>();
    e.count = value.value("count", 1);
    if (e.count < 0) throw Error(ErrorCode::Config, "recipe: negative count for '" + key + "'");
    r.entries.emplace(f, e);
  }
  return r;
}

ordered_json FormatRecipe::to_json() const {
  ordered_json j = ordered_json::object();
  for (const auto& [f, e] : entries) {
    j[std::string(to_string(f))] = {{"template_id", e.template_id}, {"count", e.count}};
  }
  return j;
}

void LabelVocabulary::add(const CanonicalRecord& rec) {
  by_dataset_[rec.source_dataset].insert(rec.label);
  by_modality_[rec.modality].insert(rec.label);
  all_.insert(rec.label);
}

std::vector<std::string> LabelVocabulary::candidates(const CanonicalRecord& rec) const {
  auto pick = [&](const std::set<std::string>& pool) {
    std::vector<std::string> out;
    for (const auto& l : pool) {
      if (l != rec.label) out.push_back(l);
    }
    return out;
  };
  if (auto it = by_dataset_.find(rec.source_dataset); it != by_dataset_.end()) {
    if (auto c = pick(it->second); !c.empty()) return c;
  }
  if (auto it = by_modality_.find(rec.modality); it != by_modality_.end()) {
    if (auto c = pick(it->second); !c.empty()) return c;
  }
  return pick(all_);
}

std::vector<InstructionFormat> formats_for(TaskKind kind, const FormatRecipe& recipe) {
  std::vector<InstructionFormat> out;
  for (auto f : kAllFormats) {
    if (!recipe.entries.contains(f)) continue;
    if (kind == TaskKind::classification && f == InstructionFormat::region_caption) continue;
    if (kind == TaskKind::detection && f == InstructionFormat::image_caption) continue;
    out.push_back(f);
  }
  return out;
}

std::vector<GenerationRequest> plan_requests(const CanonicalRecord& rec, const FormatRecipe& recipe,
                                             const PlanContext& ctx) {
  if (!ctx.templates) throw Error(ErrorCode::InvalidArgument, "plan_requests: no templates");
  if (rec.task_kind == TaskKind::detection && !rec.bbox) {
    throw Error(ErrorCode::RecipeFormatMismatch, "region_caption for record " + rec.record_id + " without bbox");
  }
  std::vector<GenerationRequest> out;
  for (auto f : formats_for(rec.task_kind, recipe)) {
    const auto& entry = recipe.entries.at(f);
    const auto it = ctx.templates->find(entry.template_id);
    if (it == ctx.templates->end()) {
      throw Error(ErrorCode::Config, "recipe references unknown template '" + entry.template_id + "'");
    }
    if (it->second.format != f) {
      throw Error(ErrorCode::RecipeFormatMismatch, "template '" + entry.template_id + "' is " +
                                                       std::string(to_string(it->second.format)) + ", recipe slot is " +
                                                       std::string(to_string(f)));
    }
    for (int seq = 0; seq < entry.count; ++seq) {
      auto req = build_request(rec, it->second, ctx.language, seq);
      if (f == InstructionFormat::visual_perception) {
        if (!ctx.vocabulary) throw Error(ErrorCode::InvalidArgument, "plan_requests: no label vocabulary");
        const auto pool = ctx.vocabulary->candidates(rec);
        if (pool.empty()) throw Error(ErrorCode::NoDistractors, "no alternative labels for '" + rec.label + "'");
        SeededRng rng(derive_seed(ctx.seed, "vp-distractors/" + req.request_id));
        std::vector<std::string> chosen;
        for (auto idx : rng.sample_indices(static_cast<std::uint32_t>(pool.size()),
                                           static_cast<std::uint32_t>(std::min(kMaxDistractors, pool.size())))) {
          chosen.push_back(pool[idx]);
        }
        req.mcq = build_vp_question(rec, chosen, derive_seed(ctx.seed, "vp-options/" + req.request_id));
        req.prompt_text += "\n\nMultiple-choice question shown to the learner:\n" + req.mcq->render() +
                           "\nCorrect answer: " + letter(req.mcq->answer_index) + ". " + rec.label +
                           "\nExplain briefly why this answer is correct.";
      }
      out.push_back(std::move(req));
    }
  }
  return out;
}

}  // namespace medcorpus
