#include "medcorpus/composer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "medcorpus/error.hpp"
#include "medcorpus/hashing.hpp"
#include "medcorpus/kernels/kernels.hpp"
#include "medcorpus/review.hpp"
#include "medcorpus/rng.hpp"

namespace medcorpus {

void StageMixSpec::validate() const {
  std::set<std::string> names;
  for (const auto& e : entries) {
    if (!(e.ratio >= 0.0 && e.ratio <= 1.0)) {
      throw Error(ErrorCode::InvalidField, e.dataset_name + ": ratio outside [0,1]");
    }
    if (!names.insert(e.dataset_name).second) {
      throw Error(ErrorCode::DuplicateDataset, e.dataset_name + " appears twice in the stage " +
                                                   std::string(to_string(stage)) + " mix");
    }
  }
}

ordered_json StageMixSpec::to_json() const {
  ordered_json rows = ordered_json::array();
  for (const auto& e : entries) {
    rows.push_back({{"dataset_name", e.dataset_name},
                    {"category", e.category},
                    {"available", e.available},
                    {"ratio", e.ratio}});
  }
  return {{"stage", to_string(stage)}, {"seed", seed}, {"entries", rows}};
}

MixTable MixTable::from_json(const json& j) {
  static const std::set<std::string> kKeys = {"category", "dataset_name", "available", "ratio_stage_1_2",
                                              "ratio_stage_3"};
  MixTable t;
  if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array()) {
    throw Error(ErrorCode::Config, "mix table needs a \"rows\" array");
  }
  for (const auto& r : j["rows"]) {
    for (const auto& [k, _] : r.items()) {
      if (!kKeys.contains(k)) throw Error(ErrorCode::UnknownField, "mix table row: " + k);
    }
    MixTableRow row;
    try {
      row.category = r.at("category").get<std::string>();
      row.dataset_name = r.at("dataset_name").get<std::string>();
      if (r.contains("available") && !r["available"].is_null()) row.available = r["available"].get<std::uint64_t>();
      row.ratio_stage_1_2 = r.at("ratio_stage_1_2").get<double>();
      row.ratio_stage_3 = r.at("ratio_stage_3").get<double>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Config, std::string("mix table row: ") + e.what());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

MixTable MixTable::load(const std::filesystem::path& file) {
  try {
    return from_json(json::parse(read_text_file(file)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, file.string() + ": " + e.what());
  }
}

StageMixSpec stage_spec(const MixTable& table, Stage stage, std::uint64_t seed, const CorpusIndex& index) {
  StageMixSpec spec;
  spec.stage = stage;
  spec.seed = seed;
  for (const auto& row : table.rows) {
    MixEntry e;
    e.dataset_name = row.dataset_name;
    e.category = row.category;
    if (row.available) {
      e.available = *row.available;
    } else if (index.contains(row.dataset_name)) {
      e.available = index.size(row.dataset_name);
    }
    e.ratio = stage == Stage::III ? row.ratio_stage_3 : row.ratio_stage_1_2;
    spec.entries.push_back(std::move(e));
  }
  spec.validate();
  return spec;
}

void CorpusIndex::add_pool(const std::string& dataset, std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  Pool p;
  p.ids = std::move(ids);
  pools_[dataset] = std::move(p);
}

void CorpusIndex::add_synthetic(const std::string& dataset, std::uint64_t count) {
  Pool p;
  p.synthetic = true;
  p.synthetic_count = count;
  pools_[dataset] = std::move(p);
}

CorpusIndex CorpusIndex::from_corpus(const std::vector<InstructionSample>& corpus) {
  std::map<std::string, std::vector<std::string>> ids;
  for (const auto& s : corpus) ids[s.source_dataset].push_back(s.sample_id);
  CorpusIndex index;
  for (auto& [ds, v] : ids) index.add_pool(ds, std::move(v));
  return index;
}

bool CorpusIndex::contains(const std::string& dataset) const { return pools_.contains(dataset); }

const CorpusIndex::Pool& CorpusIndex::pool(const std::string& dataset) const {
  const auto it = pools_.find(dataset);
  if (it == pools_.end()) throw Error(ErrorCode::UnknownDataset, dataset);
  return it->second;
}

std::uint64_t CorpusIndex::size(const std::string& dataset) const {
  const Pool& p = pool(dataset);
  return p.synthetic ? p.synthetic_count : p.ids.size();
}

std::string CorpusIndex::id_at(const std::string& dataset, std::uint64_t position) const {
  const Pool& p = pool(dataset);
  if (position >= size(dataset)) throw Error(ErrorCode::InvalidArgument, dataset + ": position out of range");
  if (!p.synthetic) return p.ids[position];
  char buf[16];
  std::snprintf(buf, sizeof buf, "%09llu", static_cast<unsigned long long>(position));
  return dataset + "/" + buf;
}

std::vector<std::string> CorpusIndex::datasets() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : pools_) out.push_back(k);
  return out;
}

std::vector<std::pair<std::string, std::string>> StageManifest::sample_ids(const CorpusIndex& index) const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(total);
  for (const auto& p : picks) {
    for (auto pos : p.positions) out.emplace_back(p.dataset_name, index.id_at(p.dataset_name, pos));
  }
  return out;
}

StageManifest apply_mix(const StageMixSpec& spec, const CorpusIndex& index) {
  spec.validate();
  StageManifest m;
  m.stage = spec.stage;
  for (const auto& e : spec.entries) {
    if (!index.contains(e.dataset_name)) {
      throw Error(ErrorCode::InsufficientSamples, e.dataset_name + ": not in the corpus index");
    }
    const auto have = index.size(e.dataset_name);
    if (have < e.available) {
      throw Error(ErrorCode::InsufficientSamples, e.dataset_name + ": " + std::to_string(have) + " indexed, " +
                                                      std::to_string(e.available) + " declared available");
    }
    if (e.available > UINT32_MAX) throw Error(ErrorCode::InvalidArgument, e.dataset_name + ": pool too large");
    const auto n = static_cast<std::uint32_t>(e.available);
    const auto k = static_cast<std::uint32_t>(round_half_up_fraction(e.available, e.ratio));

    ManifestPick pick{e.dataset_name, e.category, e.available, e.ratio, {}};
    if (k == n) {
      pick.positions.resize(n);
      std::iota(pick.positions.begin(), pick.positions.end(), 0u);
    } else if (k > 0) {
      SeededRng rng(derive_seed(spec.seed, "mix/" + e.dataset_name));
      pick.positions = rng.sample_indices(n, k);
      std::sort(pick.positions.begin(), pick.positions.end());
    }
    m.total += pick.positions.size();
    m.picks.push_back(std::move(pick));
  }
  return m;
}

StageMixSpec apply_retention(const StageMixSpec& spec, const std::map<std::string, RetentionDecision>& decisions) {
  StageMixSpec out = spec;
  for (auto& e : out.entries) {
    const auto it = decisions.find(e.dataset_name);
    if (it == decisions.end()) continue;
    e.ratio = it->second.retained ? e.ratio * it->second.retained_fraction : 0.0;
  }
  return out;
}

std::uint64_t token_len(const InstructionSample& s) {
  std::uint64_t chars = 0;
  for (const auto& m : s.messages) chars += kernels::utf8_length(m.content);
  std::uint64_t len = (chars + 3) / 4;
  if (s.image_ref) len += kImageTokenStub;
  return std::max<std::uint64_t>(len, 1);
}

std::uint64_t PackedSequence::tokens() const {
  return std::accumulate(token_lengths.begin(), token_lengths.end(), std::uint64_t{0});
}

ordered_json PackedSequence::to_json() const {
  return {{"seq_id", seq_id},
          {"member_sample_ids", member_sample_ids},
          {"token_lengths", token_lengths},
          {"budget", budget},
          {"overflow", overflow}};
}

std::vector<PackedSequence> soft_pack(const std::vector<PackItem>& items, std::uint64_t budget,
                                      const std::string& seq_prefix) {
  if (budget < 1) throw Error(ErrorCode::InvalidArgument, "packing budget must be >= 1");
  std::vector<PackedSequence> out;
  std::optional<PackedSequence> open;
  std::uint64_t open_sum = 0;
  auto close = [&] {
    if (open) out.push_back(std::move(*open));
    open.reset();
    open_sum = 0;
  };
  auto start = [&] {
    PackedSequence s;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", out.size());
    s.seq_id = seq_prefix + "-" + buf;
    s.budget = budget;
    open = std::move(s);
  };
  for (const auto& item : items) {
    if (open && open_sum + item.length <= budget) {
      open->member_sample_ids.push_back(item.sample_id);
      open->token_lengths.push_back(item.length);
      open_sum += item.length;
      continue;
    }
    close();
    start();
    open->member_sample_ids.push_back(item.sample_id);
    open->token_lengths.push_back(item.length);
    open_sum = item.length;
    if (item.length > budget) {
      open->overflow = true;
      close();
    }
  }
  close();
  return out;
}

void write_manifest(const std::filesystem::path& file, const StageManifest& m, const CorpusIndex& index,
                    const ArtifactMeta& meta) {
  JsonlWriter w(file, meta);
  for (const auto& p : m.picks) {
    for (auto pos : p.positions) {
      ordered_json j;
      j["dataset_name"] = p.dataset_name;
      j["sample_id"] = index.id_at(p.dataset_name, pos);
      w.write(j);
    }
  }
  w.close();
}

void write_packed(const std::filesystem::path& file, const std::vector<PackedSequence>& seqs,
                  const ArtifactMeta& meta) {
  JsonlWriter w(file, meta);
  for (const auto& s : seqs) w.write(s.to_json());
  w.close();
}

}  // namespace medcorpus
