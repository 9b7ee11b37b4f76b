// Copyright 2026 The XFNL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xfnl/review.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <set>

#include "xfnl/error.h"
#include "xfnl/text.h"

namespace xfnl {
namespace {

using nlohmann::json;

std::optional<double> Fraction(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

void Finish(AgreementSplit& s) {
  s.both_correct_fraction = Fraction(s.both_correct, s.tasks);
  s.choice_accuracy = Fraction(s.correct_choices, 2 * s.tasks);
  s.agreement = Fraction(s.agreeing, s.tasks);
}

json SplitJson(const AgreementSplit& s) {
  auto opt = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
  return {{"tasks", s.tasks},
          {"both_correct", s.both_correct},
          {"correct_choices", s.correct_choices},
          {"agreeing", s.agreeing},
          {"both_correct_fraction", opt(s.both_correct_fraction)},
          {"choice_accuracy", opt(s.choice_accuracy)},
          {"agreement", opt(s.agreement)}};
}

template <typename Fn>
void ForEachLine(std::string_view bytes, Fn&& fn) {
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    const auto line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (Trim(line).empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord, e.what());
    }
  }
}

}  // namespace

std::vector<ReviewTask> BuildReviewTasks(
    std::span<const LabeledPrediction> preds, const Corpus& corpus,
    std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "review needs k >= 2");
  const Taxonomy& taxonomy = corpus.taxonomy();
  const std::size_t want = std::min(k, taxonomy.size());
  std::vector<ReviewTask> tasks;
  tasks.reserve(preds.size());
  for (const auto& p : preds) {
    const Statement* st = corpus.FindStatement(p.sid);
    if (st == nullptr || p.mention_index >= st->mentions.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "prediction for unknown mention " + p.sid + "#" +
                      std::to_string(p.mention_index));
    }
    const auto& ranked = p.prediction.ranked;
    if (ranked.size() < want) {
      throw Error(ErrorCode::kInvalidArgument,
                  "prediction for " + p.sid + " ranks " +
                      std::to_string(ranked.size()) + " tags, review needs " +
                      std::to_string(want));
    }
    const NumeralMention& m = st->mentions[p.mention_index];
    ReviewTask t;
    t.task_id = p.sid + "#" + std::to_string(p.mention_index);
    t.sid = p.sid;
    t.mention_index = p.mention_index;
    t.text = st->text;
    t.highlight_start = m.start;
    t.highlight_end = m.end;
    t.machine_top1 = p.prediction.top1();
    t.gold = p.gold;
    std::vector<std::string> chosen;
    for (std::size_t i = 0; i < want; ++i) chosen.push_back(ranked[i].tag_id);
    if (std::find(chosen.begin(), chosen.end(), p.gold) == chosen.end()) {
      chosen.back() = p.gold;
    }
    std::mt19937_64 rng(Mix64(seed ^ Fnv1a64(t.task_id)));
    for (std::size_t i = chosen.size(); i > 1; --i) {
      std::swap(chosen[i - 1], chosen[UniformBelow(rng, i)]);
    }
    for (auto& tag : chosen) {
      t.candidates.push_back({tag, taxonomy.Get(tag).documentation});
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

json TaskToClientJson(const ReviewTask& task) {
  json candidates = json::array();
  for (const auto& c : task.candidates) {
    candidates.push_back({{"tag", c.tag_id}, {"documentation", c.documentation}});
  }
  return {{"task_id", task.task_id},
          {"text", task.text},
          {"highlight", {{"start", task.highlight_start},
                         {"end", task.highlight_end}}},
          {"candidates", std::move(candidates)}};
}

json TaskToStoredJson(const ReviewTask& task) {
  json doc = TaskToClientJson(task);
  doc["sid"] = task.sid;
  doc["mention"] = task.mention_index;
  doc["machine_top1"] = task.machine_top1;
  doc["gold"] = task.gold;
  return doc;
}

ReviewTask TaskFromStoredJson(const json& doc) {
  ReviewTask t;
  t.task_id = doc.at("task_id").get<std::string>();
  t.sid = doc.at("sid").get<std::string>();
  t.mention_index = doc.at("mention").get<std::size_t>();
  t.text = doc.at("text").get<std::string>();
  t.highlight_start = doc.at("highlight").at("start").get<std::size_t>();
  t.highlight_end = doc.at("highlight").at("end").get<std::size_t>();
  for (const auto& c : doc.at("candidates")) {
    t.candidates.push_back({c.at("tag").get<std::string>(),
                            c.at("documentation").get<std::string>()});
  }
  t.machine_top1 = doc.at("machine_top1").get<std::string>();
  t.gold = doc.at("gold").get<std::string>();
  return t;
}

std::string SerializeTasks(const std::vector<ReviewTask>& tasks) {
  std::string out;
  for (const auto& t : tasks) out += TaskToStoredJson(t).dump() + "\n";
  return out;
}

std::vector<ReviewTask> ParseTasks(std::string_view bytes) {
  std::vector<ReviewTask> tasks;
  ForEachLine(bytes, [&](const json& doc) {
    tasks.push_back(TaskFromStoredJson(doc));
  });
  return tasks;
}

json AnnotationToJson(const AnnotationRecord& record) {
  return {{"task_id", record.task_id},
          {"annotator", record.annotator},
          {"chosen", record.chosen},
          {"timestamp", record.timestamp}};
}

AnnotationRecord AnnotationFromJson(const json& doc) {
  AnnotationRecord r;
  r.task_id = doc.at("task_id").get<std::string>();
  r.annotator = doc.at("annotator").get<std::string>();
  r.chosen = doc.at("chosen").get<std::string>();
  r.timestamp = doc.value("timestamp", std::string());
  return r;
}

std::vector<AnnotationRecord> ParseAnnotations(std::string_view bytes) {
  std::vector<AnnotationRecord> out;
  ForEachLine(bytes, [&](const json& doc) {
    out.push_back(AnnotationFromJson(doc));
  });
  return out;
}

AgreementReport ComputeAgreement(std::span<const AnnotationRecord> annotations,
                                 std::span<const ReviewTask> tasks) {
  std::map<std::string, const ReviewTask*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.task_id, &t);
  // task -> annotator -> first choice
  std::map<std::string, std::map<std::string, std::string>> choices;
  for (const auto& a : annotations) {
    if (!by_id.contains(a.task_id)) continue;
    choices[a.task_id].emplace(a.annotator, a.chosen);
  }
  AgreementReport report;
  for (const auto& [task_id, by_annotator] : choices) {
    if (by_annotator.size() != 2) {
      ++report.excluded_tasks;
      continue;
    }
    const ReviewTask& task = *by_id.at(task_id);
    const std::string& first = by_annotator.begin()->second;
    const std::string& second = std::next(by_annotator.begin())->second;
    AgreementSplit& split = task.machine_top1 == task.gold
                                ? report.machine_correct
                                : report.machine_incorrect;
    for (AgreementSplit* s : {&split, &report.overall}) {
      ++s->tasks;
      s->both_correct += (first == task.gold && second == task.gold) ? 1 : 0;
      s->correct_choices +=
          (first == task.gold ? 1 : 0) + (second == task.gold ? 1 : 0);
      s->agreeing += first == second ? 1 : 0;
    }
  }
  if (report.overall.tasks == 0) {
    throw Error(ErrorCode::kInvalidArgument, "no doubly-annotated tasks");
  }
  Finish(report.machine_correct);
  Finish(report.machine_incorrect);
  Finish(report.overall);
  return report;
}

json AgreementToJson(const AgreementReport& report) {
  return {{"machine_correct", SplitJson(report.machine_correct)},
          {"machine_incorrect", SplitJson(report.machine_incorrect)},
          {"overall", SplitJson(report.overall)},
          {"excluded_tasks", report.excluded_tasks}};
}

std::string UtcTimestamp() {
  const auto now = std::chrono::floor<std::chrono::seconds>(
      std::chrono::system_clock::now());
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ReviewStore::ReviewStore(std::vector<ReviewTask> tasks,
                         std::string annotations_path)
    : tasks_(std::move(tasks)), annotations_path_(std::move(annotations_path)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (!by_id_.emplace(tasks_[i].task_id, i).second) {
      throw Error(ErrorCode::kMalformedRecord,
                  "duplicate task id " + tasks_[i].task_id);
    }
  }
}

std::unique_ptr<ReviewStore> ReviewStore::Load(
    const std::string& tasks_path, const std::string& annotations_path) {
  auto store = std::make_unique<ReviewStore>(ParseTasks(ReadFile(tasks_path)),
                                             annotations_path);
  if (!annotations_path.empty() && std::ifstream(annotations_path).good()) {
    for (auto& r : ParseAnnotations(ReadFile(annotations_path))) {
      if (store->Validate(r) == SubmitStatus::kOk) {
        store->annotators_by_task_[r.task_id].push_back(r.annotator);
        store->annotations_.push_back(std::move(r));
      }
    }
  }
  return store;
}

std::optional<ReviewTask> ReviewStore::NextTask(
    const std::string& annotator) const {
  std::lock_guard lock(mu_);
  for (const auto& t : tasks_) {
    auto it = annotators_by_task_.find(t.task_id);
    if (it == annotators_by_task_.end()) return t;
    const auto& who = it->second;
    if (who.size() < 2 &&
        std::find(who.begin(), who.end(), annotator) == who.end()) {
      return t;
    }
  }
  return std::nullopt;
}

ReviewStore::SubmitStatus ReviewStore::Validate(
    const AnnotationRecord& record) const {
  auto it = by_id_.find(record.task_id);
  if (it == by_id_.end()) return SubmitStatus::kUnknownTask;
  const auto& candidates = tasks_[it->second].candidates;
  if (std::none_of(candidates.begin(), candidates.end(),
                   [&](const Candidate& c) { return c.tag_id == record.chosen; })) {
    return SubmitStatus::kNotACandidate;
  }
  auto who = annotators_by_task_.find(record.task_id);
  if (who != annotators_by_task_.end() &&
      (who->second.size() >= 2 ||
       std::find(who->second.begin(), who->second.end(), record.annotator) !=
           who->second.end())) {
    return SubmitStatus::kDuplicate;
  }
  return SubmitStatus::kOk;
}

ReviewStore::SubmitStatus ReviewStore::Submit(AnnotationRecord record) {
  std::lock_guard lock(mu_);
  const SubmitStatus status = Validate(record);
  if (status != SubmitStatus::kOk) return status;
  if (record.timestamp.empty()) record.timestamp = UtcTimestamp();
  if (!annotations_path_.empty()) {
    std::ofstream out(annotations_path_, std::ios::app);
    if (!out) throw Error(ErrorCode::kIo, "cannot append " + annotations_path_);
    out << AnnotationToJson(record).dump() << "\n" << std::flush;
  }
  annotators_by_task_[record.task_id].push_back(record.annotator);
  annotations_.push_back(std::move(record));
  return SubmitStatus::kOk;
}

AgreementReport ReviewStore::Report() const {
  std::lock_guard lock(mu_);
  return ComputeAgreement(annotations_, tasks_);
}

std::vector<AnnotationRecord> ReviewStore::annotations() const {
  std::lock_guard lock(mu_);
  return annotations_;
}

}  // namespace xfnl
