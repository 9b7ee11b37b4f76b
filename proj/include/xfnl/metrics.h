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

#ifndef XFNL_METRICS_H_
#define XFNL_METRICS_H_

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xfnl/corpus.h"
#include "xfnl/matcher.h"

namespace xfnl {

struct LabeledPrediction {
  std::string sid;
  std::size_t mention_index = 0;
  std::string gold;
  Prediction prediction;

  bool operator==(const LabeledPrediction&) const = default;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold occurrences
};

struct MacroMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::map<std::string, ClassScores> per_tag;
};

// Single-label multi-class P/R/F1 of the top-1 prediction, averaged without
// weights over `class_set`. Any 0/0 ratio is 0.
MacroMetrics ComputeMacroMetrics(std::span<const LabeledPrediction> preds,
                                 const std::set<std::string>& class_set);

// Fraction of predictions whose gold tag is among the first k ranked tags.
// Returns 0 for an empty input.
double HitsAtK(std::span<const LabeledPrediction> preds, std::size_t k);

// Word-set Jaccard similarity under TokenizeWords. Two texts without words
// compare as 1.
double Jaccard(std::string_view a, std::string_view b);

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

// Bin edges 0, 1/n, ..., 1: bins are [lo, hi) except the last, [lo, 1].
std::vector<double> UniformBinEdges(std::size_t bins);

// Jaccard similarity between the documentations of the top-1 and gold tags,
// histogrammed over the top-1 errors only.
std::vector<HistogramBin> ErrorHistogram(
    std::span<const LabeledPrediction> preds, const Taxonomy& taxonomy,
    const std::vector<double>& edges);

struct GroupReport {
  std::string label;
  std::size_t tag_count = 0;  // distinct gold tags among the examples
  std::size_t support = 0;    // examples
  std::optional<double> macro_f1;
  std::optional<double> hits_at_1;
};

struct Breakdown {
  std::vector<GroupReport> buckets;  // in BucketEdges::Labels() order
  GroupReport zero_shot;
};

// Restricts the predictions to each frequency bucket (by train frequency of
// the gold tag) and to the zero-shot tag set; within a group the macro
// average runs over the group's gold tags.
Breakdown BreakdownReports(std::span<const LabeledPrediction> preds,
                           const Corpus& corpus, const BucketEdges& edges);

struct EvalOptions {
  std::size_t max_k = 5;
  bool others_in_macro = true;
  bool others_in_hits = true;
  // Average over the whole taxonomy instead of the evaluation gold tags.
  bool full_taxonomy_classes = false;
  BucketEdges bucket_edges;
  std::vector<double> histogram_edges = UniformBinEdges(5);
};

struct EvalReport {
  double macro_p = 0.0;
  double macro_r = 0.0;
  double macro_f1 = 0.0;
  std::map<std::size_t, double> hits_at;
  std::map<std::string, ClassScores> per_tag;
  Breakdown breakdown;
  std::vector<HistogramBin> jaccard_histogram;
  std::size_t n_examples = 0;
  std::size_t n_failed = 0;
};

// Full evaluation battery. Predictions are canonically sorted first so the
// result does not depend on input order.
EvalReport Evaluate(std::vector<LabeledPrediction> preds, const Corpus& corpus,
                    const EvalOptions& options = {});

// Deterministic JSON document (sorted keys, fixed number formatting).
std::string ReportToJson(const EvalReport& report);

// Human-readable summary table.
std::string FormatReport(const EvalReport& report);

}  // namespace xfnl

#endif  // XFNL_METRICS_H_
