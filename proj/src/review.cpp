#include "medcorpus/review.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <set>

#include "medcorpus/error.hpp"
#include "medcorpus/hashing.hpp"
#include "medcorpus/rng.hpp"

namespace medcorpus {
namespace fs = std::filesystem;

void ReviewPolicy::validate() const {
  if (min_samples_seen < 1) throw Error(ErrorCode::Config, "review.min_samples_seen must be >= 1");
  if (subset_size < 1) throw Error(ErrorCode::Config, "review.subset_size must be >= 1");
  if (!(diversity_fraction >= 0.0 && diversity_fraction <= 1.0)) {
    throw Error(ErrorCode::Config, "review.diversity_fraction outside [0,1]");
  }
  if (!(diversity_pool_rate >= 0.0 && diversity_pool_rate <= 1.0)) {
    throw Error(ErrorCode::Config, "review.diversity_pool_rate outside [0,1]");
  }
}

ReviewPolicy ReviewPolicy::from_json(const json& j, std::uint64_t seed) {
  static const std::set<std::string> kKeys = {"min_samples_seen", "subset_size", "diversity_fraction",
                                              "diversity_pool_rate"};
  ReviewPolicy p;
  p.seed = seed;
  if (j.is_null()) return p;
  for (const auto& [k, _] : j.items()) {
    if (!kKeys.contains(k)) throw Error(ErrorCode::UnknownField, "review." + k);
  }
  try {
    p.min_samples_seen = j.value("min_samples_seen", p.min_samples_seen);
    p.subset_size = j.value("subset_size", p.subset_size);
    p.diversity_fraction = j.value("diversity_fraction", p.diversity_fraction);
    p.diversity_pool_rate = j.value("diversity_pool_rate", p.diversity_pool_rate);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("review: ") + e.what());
  }
  p.validate();
  return p;
}

ordered_json ReviewPolicy::to_json() const {
  return {{"min_samples_seen", min_samples_seen},
          {"subset_size", subset_size},
          {"diversity_fraction", diversity_fraction},
          {"diversity_pool_rate", diversity_pool_rate}};
}

ordered_json QualityLabel::to_json() const {
  ordered_json j;
  j["dataset_name"] = dataset_name;
  j["reviewer"] = reviewer;
  j["verdict"] = to_string(verdict);
  j["sample_ids_seen"] = sample_ids_seen;
  j["timestamp"] = timestamp;
  if (!notes.empty()) j["notes"] = notes;
  return j;
}

QualityLabel QualityLabel::from_json(const json& j) {
  QualityLabel l;
  try {
    l.dataset_name = j.at("dataset_name").get<std::string>();
    l.reviewer = j.value("reviewer", std::string());
    l.verdict = parse_verdict(j.at("verdict").get<std::string>());
    l.sample_ids_seen = j.value("sample_ids_seen", std::vector<std::string>{});
    l.timestamp = j.value("timestamp", std::string());
    l.notes = j.value("notes", std::string());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidField, std::string("quality label: ") + e.what());
  }
  return l;
}

ordered_json RetentionDecision::to_json() const {
  return {{"dataset_name", dataset_name}, {"retained", retained}, {"retained_fraction", retained_fraction}};
}

RetentionDecision RetentionDecision::from_json(const json& j) {
  RetentionDecision d;
  d.dataset_name = j.at("dataset_name").get<std::string>();
  d.retained = j.at("retained").get<bool>();
  d.retained_fraction = j.at("retained_fraction").get<double>();
  return d;
}

Verdict aggregate_verdict(const std::vector<Verdict>& verdicts) {
  const auto high = std::count(verdicts.begin(), verdicts.end(), Verdict::high);
  const auto low = static_cast<std::ptrdiff_t>(verdicts.size()) - high;
  return high > low ? Verdict::high : Verdict::low;
}

bool in_diversity_pool(const std::string& dataset, const ReviewPolicy& policy) {
  SeededRng rng(derive_seed(policy.seed, "diversity/" + dataset));
  return rng.uniform01() < policy.diversity_pool_rate;
}

RetentionDecision decide_retention(const std::string& dataset, Verdict aggregate, const ReviewPolicy& policy) {
  if (aggregate == Verdict::high) return {dataset, true, 1.0};
  if (in_diversity_pool(dataset, policy)) return {dataset, true, policy.diversity_fraction};
  return {dataset, false, 0.0};
}

std::string utc_now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::map<std::string, RetentionDecision> load_decisions(const fs::path& file) {
  std::map<std::string, RetentionDecision> out;
  json doc;
  try {
    doc = json::parse(read_text_file(file));
    for (const auto& d : doc.at("decisions")) {
      auto rd = RetentionDecision::from_json(d);
      out.emplace(rd.dataset_name, rd);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, file.string() + ": " + e.what());
  }
  return out;
}

ReviewService::ReviewService(std::vector<std::string> registry_datasets, std::vector<InstructionSample> corpus,
                             std::vector<CanonicalRecord> records, ReviewPolicy policy, fs::path state_dir,
                             std::string run_hash)
    : policy_(std::move(policy)), state_dir_(std::move(state_dir)), run_hash_(std::move(run_hash)) {
  policy_.validate();
  std::set<std::string> names(registry_datasets.begin(), registry_datasets.end());
  std::map<std::string, std::vector<InstructionSample>> by_dataset;
  for (auto& s : corpus) {
    names.insert(s.source_dataset);
    by_dataset[s.source_dataset].push_back(std::move(s));
  }
  datasets_.assign(names.begin(), names.end());
  for (const auto& name : datasets_) {
    auto& samples = by_dataset[name];
    std::sort(samples.begin(), samples.end(),
              [](const InstructionSample& a, const InstructionSample& b) { return a.sample_id < b.sample_id; });
    counts_[name] = samples.size();
    SeededRng rng(derive_seed(policy_.seed, "review-subset/" + name));
    rng.shuffle(std::span<InstructionSample>(samples));
    if (samples.size() > policy_.subset_size) samples.resize(policy_.subset_size);
    subsets_[name] = std::move(samples);
  }
  for (auto& r : records) records_.emplace(r.record_id, std::move(r));

  fs::create_directories(state_dir_);
  auto state = std::make_shared<LabelState>();
  if (fs::exists(events_path())) {
    for_each_jsonl(events_path(), [&](const json& j) { apply(*state, QualityLabel::from_json(j)); });
  }
  state_ = state;
  write_snapshot(*state);
}

std::vector<std::string> ReviewService::datasets() const { return datasets_; }

bool ReviewService::has_dataset(const std::string& dataset) const { return subsets_.contains(dataset); }

std::size_t ReviewService::sample_count(const std::string& dataset) const {
  const auto it = counts_.find(dataset);
  if (it == counts_.end()) throw Error(ErrorCode::UnknownDataset, dataset);
  return it->second;
}

const std::vector<InstructionSample>& ReviewService::subset(const std::string& dataset) const {
  const auto it = subsets_.find(dataset);
  if (it == subsets_.end()) throw Error(ErrorCode::UnknownDataset, dataset);
  return it->second;
}

ReviewBatch ReviewService::next_batch(const std::string& dataset, std::size_t size, std::size_t cursor) const {
  const auto& sub = subset(dataset);
  if (size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  if (cursor >= sub.size()) {
    throw Error(ErrorCode::EndOfSubset, dataset + ": cursor " + std::to_string(cursor) + " of " +
                                            std::to_string(sub.size()));
  }
  ReviewBatch b;
  const auto end = std::min(sub.size(), cursor + size);
  b.samples.assign(sub.begin() + static_cast<std::ptrdiff_t>(cursor), sub.begin() + static_cast<std::ptrdiff_t>(end));
  b.next_cursor = end;
  b.end = end == sub.size();
  return b;
}

std::size_t ReviewService::required_views(const std::string& dataset) const {
  return std::min(static_cast<std::size_t>(policy_.min_samples_seen), subset(dataset).size());
}

void ReviewService::validate(const QualityLabel& label) const {
  if (!has_dataset(label.dataset_name)) throw Error(ErrorCode::UnknownDataset, label.dataset_name);
  if (label.reviewer.empty()) throw Error(ErrorCode::MissingField, "reviewer");
  const auto& sub = subset(label.dataset_name);
  std::set<std::string> members;
  for (const auto& s : sub) members.insert(s.sample_id);
  std::set<std::string> seen;
  for (const auto& id : label.sample_ids_seen) {
    if (!members.contains(id)) {
      throw Error(ErrorCode::InsufficientReview, id + " is not in the review subset of " + label.dataset_name);
    }
    seen.insert(id);
  }
  const auto need = required_views(label.dataset_name);
  if (sub.empty() || seen.size() < need) {
    throw Error(ErrorCode::InsufficientReview, label.dataset_name + ": " + std::to_string(seen.size()) +
                                                   " distinct samples seen, " + std::to_string(std::max<std::size_t>(need, 1)) +
                                                   " required");
  }
}

void ReviewService::apply(LabelState& state, const QualityLabel& label) const {
  state[label.dataset_name][label.reviewer] = label.verdict;
}

void ReviewService::write_snapshot(const LabelState& state) const {
  ordered_json doc;
  doc["_meta"] = ArtifactMeta{"review-decisions", policy_.seed, run_hash_, kLayoutVersion}.to_json();
  doc["policy"] = policy_.to_json();
  ordered_json decisions = ordered_json::array();
  ordered_json aggregates = ordered_json::object();
  for (const auto& [ds, by_reviewer] : state) {
    std::vector<Verdict> vs;
    for (const auto& [_, v] : by_reviewer) vs.push_back(v);
    const Verdict agg = aggregate_verdict(vs);
    aggregates[ds] = to_string(agg);
    decisions.push_back(decide_retention(ds, agg, policy_).to_json());
  }
  doc["aggregates"] = aggregates;
  doc["decisions"] = decisions;
  const auto tmp = decisions_path().string() + ".tmp";
  write_text_file(tmp, doc.dump(2) + "\n");
  fs::rename(tmp, decisions_path());
}

std::shared_ptr<const ReviewService::LabelState> ReviewService::snapshot() const { return std::atomic_load(&state_); }

void ReviewService::submit_label(QualityLabel label) {
  validate(label);
  if (label.timestamp.empty()) label.timestamp = utc_now_iso8601();
  std::lock_guard lock(write_mu_);
  const bool fresh = !fs::exists(events_path());
  {
    std::ofstream out(events_path(), std::ios::app | std::ios::binary);
    if (fresh) out << json{{"_meta", ArtifactMeta{"review-events", policy_.seed, run_hash_, kLayoutVersion}.to_json()}}.dump() << "\n";
    out << label.to_json().dump() << "\n";
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "cannot append to " + events_path().string());
  }
  auto next = std::make_shared<LabelState>(*snapshot());
  apply(*next, label);
  write_snapshot(*next);
  std::atomic_store(&state_, std::shared_ptr<const LabelState>(std::move(next)));
}

std::map<std::string, Verdict> ReviewService::labels(const std::string& dataset) const {
  const auto s = snapshot();
  const auto it = s->find(dataset);
  return it == s->end() ? std::map<std::string, Verdict>{} : it->second;
}

std::optional<Verdict> ReviewService::aggregate(const std::string& dataset) const {
  const auto by_reviewer = labels(dataset);
  if (by_reviewer.empty()) return std::nullopt;
  std::vector<Verdict> vs;
  for (const auto& [_, v] : by_reviewer) vs.push_back(v);
  return aggregate_verdict(vs);
}

RetentionDecision ReviewService::retention(const std::string& dataset) const {
  if (!has_dataset(dataset)) throw Error(ErrorCode::UnknownDataset, dataset);
  const auto agg = aggregate(dataset);
  if (!agg) throw Error(ErrorCode::NoVerdict, dataset);
  return decide_retention(dataset, *agg, policy_);
}

std::map<std::string, RetentionDecision> ReviewService::decisions() const {
  std::map<std::string, RetentionDecision> out;
  for (const auto& [ds, _] : *snapshot()) out.emplace(ds, retention(ds));
  return out;
}

const CanonicalRecord* ReviewService::record(const std::string& record_id) const {
  const auto it = records_.find(record_id);
  return it == records_.end() ? nullptr : &it->second;
}

}  // namespace medcorpus
