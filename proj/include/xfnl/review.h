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

#ifndef XFNL_REVIEW_H_
#define XFNL_REVIEW_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xfnl/corpus.h"
#include "xfnl/metrics.h"

namespace xfnl {

struct Candidate {
  std::string tag_id;
  std::string documentation;

  bool operator==(const Candidate&) const = default;
};

// One expert-review item. `gold` and `machine_top1` stay on the server; the
// client view omits them.
struct ReviewTask {
  std::string task_id;
  std::string sid;
  std::size_t mention_index = 0;
  std::string text;
  std::size_t highlight_start = 0;  // code points, end exclusive
  std::size_t highlight_end = 0;
  std::vector<Candidate> candidates;
  std::string machine_top1;
  std::string gold;

  bool operator==(const ReviewTask&) const = default;
};

// Candidates are the machine's top min(k, taxonomy size) tags; a missing
// gold tag replaces the last of them. Display order is shuffled per task
// from `seed`. Requires k >= 2.
std::vector<ReviewTask> BuildReviewTasks(
    std::span<const LabeledPrediction> preds, const Corpus& corpus,
    std::size_t k, std::uint64_t seed);

nlohmann::json TaskToClientJson(const ReviewTask& task);
nlohmann::json TaskToStoredJson(const ReviewTask& task);
ReviewTask TaskFromStoredJson(const nlohmann::json& doc);

std::string SerializeTasks(const std::vector<ReviewTask>& tasks);
std::vector<ReviewTask> ParseTasks(std::string_view bytes);

struct AnnotationRecord {
  std::string task_id;
  std::string annotator;
  std::string chosen;
  std::string timestamp;  // ISO-8601 UTC

  bool operator==(const AnnotationRecord&) const = default;
};

nlohmann::json AnnotationToJson(const AnnotationRecord& record);
AnnotationRecord AnnotationFromJson(const nlohmann::json& doc);
std::vector<AnnotationRecord> ParseAnnotations(std::string_view bytes);

struct AgreementSplit {
  std::size_t tasks = 0;
  std::size_t both_correct = 0;     // tasks where both chose gold
  std::size_t correct_choices = 0;  // over 2 * tasks choices
  std::size_t agreeing = 0;         // tasks where both chose the same tag
  // Fractions are null when the split has no tasks.
  std::optional<double> both_correct_fraction;
  std::optional<double> choice_accuracy;
  std::optional<double> agreement;
};

struct AgreementReport {
  AgreementSplit machine_correct;
  AgreementSplit machine_incorrect;
  AgreementSplit overall;
  std::size_t excluded_tasks = 0;  // annotated, but not by exactly two people
};

// Only tasks annotated by exactly two distinct annotators count; the first
// record per (task, annotator) is used. Throws kInvalidArgument when no task
// qualifies.
AgreementReport ComputeAgreement(std::span<const AnnotationRecord> annotations,
                                 std::span<const ReviewTask> tasks);

nlohmann::json AgreementToJson(const AgreementReport& report);

std::string UtcTimestamp();

// Thread-safe task queue and annotation log backing the review endpoints.
// Annotations are appended to `annotations_path` when it is set.
class ReviewStore {
 public:
  enum class SubmitStatus { kOk, kUnknownTask, kNotACandidate, kDuplicate };

  explicit ReviewStore(std::vector<ReviewTask> tasks,
                       std::string annotations_path = {});

  // Tasks from a stored task file; previously recorded annotations are
  // replayed from `annotations_path` when it exists.
  static std::unique_ptr<ReviewStore> Load(
      const std::string& tasks_path, const std::string& annotations_path);

  // First task, in task order, that `annotator` has not annotated and that
  // has fewer than two annotators.
  std::optional<ReviewTask> NextTask(const std::string& annotator) const;

  // kDuplicate also covers a task that already has two annotators.
  SubmitStatus Submit(AnnotationRecord record);

  AgreementReport Report() const;
  std::vector<AnnotationRecord> annotations() const;
  std::size_t task_count() const { return tasks_.size(); }

 private:
  SubmitStatus Validate(const AnnotationRecord& record) const;

  std::vector<ReviewTask> tasks_;
  std::map<std::string, std::size_t> by_id_;
  std::string annotations_path_;
  mutable std::mutex mu_;
  std::vector<AnnotationRecord> annotations_;
  std::map<std::string, std::vector<std::string>> annotators_by_task_;
};

}  // namespace xfnl

#endif  // XFNL_REVIEW_H_
