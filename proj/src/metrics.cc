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

#include "xfnl/metrics.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "xfnl/error.h"
#include "xfnl/text.h"

namespace xfnl {
namespace {

using nlohmann::json;

double Ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double HarmonicMean(double p, double r) {
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

bool CanonicalOrder(const LabeledPrediction& a, const LabeledPrediction& b) {
  if (a.sid != b.sid) return a.sid < b.sid;
  return a.mention_index < b.mention_index;
}

GroupReport ScoreGroup(std::string label,
                       const std::vector<LabeledPrediction>& group) {
  GroupReport g;
  g.label = std::move(label);
  g.support = group.size();
  std::set<std::string> golds;
  for (const auto& p : group) golds.insert(p.gold);
  g.tag_count = golds.size();
  if (!group.empty()) {
    g.macro_f1 = ComputeMacroMetrics(group, golds).f1;
    g.hits_at_1 = HitsAtK(group, 1);
  }
  return g;
}

json ScoresJson(const ClassScores& s) {
  return {{"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1},
          {"support", s.support}};
}

json GroupJson(const GroupReport& g) {
  json j = {{"label", g.label},
            {"tag_count", g.tag_count},
            {"support", g.support},
            {"macro_f1", nullptr},
            {"hits_at_1", nullptr}};
  if (g.macro_f1) j["macro_f1"] = *g.macro_f1;
  if (g.hits_at_1) j["hits_at_1"] = *g.hits_at_1;
  return j;
}

std::string Percent(std::optional<double> v) {
  if (!v) return "     -";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * *v);
  return buf;
}

}  // namespace

MacroMetrics ComputeMacroMetrics(std::span<const LabeledPrediction> preds,
                                 const std::set<std::string>& class_set) {
  if (preds.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no predictions to score");
  }
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> counts;
  for (const auto& c : class_set) counts[c];
  for (const auto& p : preds) {
    if (!class_set.contains(p.gold)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "class set lacks gold tag '" + p.gold + "'");
    }
    if (p.prediction.ranked.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "empty ranking");
    }
    const std::string& top = p.prediction.top1();
    if (top == p.gold) {
      ++counts[p.gold].tp;
    } else {
      ++counts[p.gold].fn;
      auto it = counts.find(top);
      if (it != counts.end()) ++it->second.fp;
    }
  }
  MacroMetrics m;
  for (const auto& [tag, c] : counts) {
    ClassScores s;
    s.precision = Ratio(c.tp, c.tp + c.fp);
    s.recall = Ratio(c.tp, c.tp + c.fn);
    s.f1 = HarmonicMean(s.precision, s.recall);
    s.support = c.tp + c.fn;
    m.precision += s.precision;
    m.recall += s.recall;
    m.f1 += s.f1;
    m.per_tag.emplace(tag, s);
  }
  const double n = static_cast<double>(counts.size());
  if (n > 0) {
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
  }
  return m;
}

double HitsAtK(std::span<const LabeledPrediction> preds, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  std::size_t hits = 0;
  for (const auto& p : preds) {
    const auto& ranked = p.prediction.ranked;
    const auto end = ranked.begin() +
                     static_cast<std::ptrdiff_t>(std::min(k, ranked.size()));
    if (std::any_of(ranked.begin(), end,
                    [&](const RankedTag& r) { return r.tag_id == p.gold; })) {
      ++hits;
    }
  }
  return Ratio(hits, preds.size());
}

double Jaccard(std::string_view a, std::string_view b) {
  const auto wa = TokenizeWords(a);
  const auto wb = TokenizeWords(b);
  const std::set<std::string> sa(wa.begin(), wa.end());
  const std::set<std::string> sb(wb.begin(), wb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& w : sa) inter += sb.contains(w) ? 1 : 0;
  return Ratio(inter, sa.size() + sb.size() - inter);
}

std::vector<double> UniformBinEdges(std::size_t bins) {
  if (bins == 0) throw Error(ErrorCode::kInvalidArgument, "zero bins");
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = static_cast<double>(i) / static_cast<double>(bins);
  }
  return edges;
}

std::vector<HistogramBin> ErrorHistogram(
    std::span<const LabeledPrediction> preds, const Taxonomy& taxonomy,
    const std::vector<double>& edges) {
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0 ||
      !std::is_sorted(edges.begin(), edges.end(), std::less_equal<>())) {
    throw Error(ErrorCode::kInvalidArgument,
                "histogram edges must increase from 0 to 1");
  }
  std::vector<HistogramBin> bins;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    bins.push_back({edges[i], edges[i + 1], 0});
  }
  for (const auto& p : preds) {
    const std::string& top = p.prediction.top1();
    if (top == p.gold) continue;
    const double j = Jaccard(taxonomy.Get(top).documentation,
                             taxonomy.Get(p.gold).documentation);
    auto it = std::upper_bound(edges.begin(), edges.end(), j);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin());
    bin = bin == 0 ? 0 : std::min(bin - 1, bins.size() - 1);
    ++bins[bin].count;
  }
  return bins;
}

Breakdown BreakdownReports(std::span<const LabeledPrediction> preds,
                           const Corpus& corpus, const BucketEdges& edges) {
  const auto labels = edges.Labels();
  std::map<std::string, std::vector<LabeledPrediction>> by_bucket;
  std::vector<LabeledPrediction> zero_shot;
  const auto unseen = ZeroShotTags(corpus);
  for (const auto& p : preds) {
    by_bucket[FrequencyBucket(corpus.TrainFrequency(p.gold), edges)]
        .push_back(p);
    if (unseen.contains(p.gold)) zero_shot.push_back(p);
  }
  Breakdown b;
  for (const auto& label : labels) {
    b.buckets.push_back(ScoreGroup(label, by_bucket[label]));
  }
  b.zero_shot = ScoreGroup("zero-shot tags", zero_shot);
  return b;
}

EvalReport Evaluate(std::vector<LabeledPrediction> preds, const Corpus& corpus,
                    const EvalOptions& options) {
  std::sort(preds.begin(), preds.end(), CanonicalOrder);
  const auto keep_others = [](bool keep) {
    return [keep](const LabeledPrediction& p) {
      return keep || p.gold != kOthersTag;
    };
  };
  std::vector<LabeledPrediction> macro_preds;
  std::copy_if(preds.begin(), preds.end(), std::back_inserter(macro_preds),
               keep_others(options.others_in_macro));
  std::set<std::string> classes;
  if (options.full_taxonomy_classes) {
    for (const auto& r : corpus.taxonomy().records()) classes.insert(r.tag_id);
  } else {
    for (const auto& p : macro_preds) classes.insert(p.gold);
  }
  if (!options.others_in_macro) classes.erase(std::string(kOthersTag));

  EvalReport report;
  const MacroMetrics macro = ComputeMacroMetrics(macro_preds, classes);
  report.macro_p = macro.precision;
  report.macro_r = macro.recall;
  report.macro_f1 = macro.f1;
  report.per_tag = macro.per_tag;

  std::vector<LabeledPrediction> hits_preds;
  std::copy_if(preds.begin(), preds.end(), std::back_inserter(hits_preds),
               keep_others(options.others_in_hits));
  for (std::size_t k = 1; k <= options.max_k; ++k) {
    report.hits_at[k] = HitsAtK(hits_preds, k);
  }
  report.breakdown = BreakdownReports(preds, corpus, options.bucket_edges);
  report.jaccard_histogram =
      ErrorHistogram(preds, corpus.taxonomy(), options.histogram_edges);
  report.n_examples = preds.size();
  return report;
}

std::string ReportToJson(const EvalReport& report) {
  json hits = json::object();
  for (const auto& [k, v] : report.hits_at) hits[std::to_string(k)] = v;
  json per_tag = json::array();
  for (const auto& [tag, s] : report.per_tag) {
    json row = ScoresJson(s);
    row["tag"] = tag;
    per_tag.push_back(std::move(row));
  }
  json buckets = json::array();
  for (const auto& g : report.breakdown.buckets) buckets.push_back(GroupJson(g));
  json histogram = json::array();
  for (const auto& bin : report.jaccard_histogram) {
    histogram.push_back(
        {{"lower", bin.lower}, {"upper", bin.upper}, {"count", bin.count}});
  }
  const json doc = {
      {"macro",
       {{"precision", report.macro_p},
        {"recall", report.macro_r},
        {"f1", report.macro_f1}}},
      {"hits", std::move(hits)},
      {"per_tag", std::move(per_tag)},
      {"buckets", std::move(buckets)},
      {"zero_shot", GroupJson(report.breakdown.zero_shot)},
      {"jaccard_histogram", std::move(histogram)},
      {"n_examples", report.n_examples},
      {"n_failed", report.n_failed},
  };
  return doc.dump(2) + "\n";
}

std::string FormatReport(const EvalReport& report) {
  std::ostringstream out;
  out << "examples: " << report.n_examples
      << "  failed: " << report.n_failed << "\n";
  out << "Macro-P " << Percent(report.macro_p) << "  Macro-R "
      << Percent(report.macro_r) << "  Macro-F1 " << Percent(report.macro_f1)
      << "\n";
  for (const auto& [k, v] : report.hits_at) {
    out << "Hits@" << k << " " << Percent(v) << "\n";
  }
  out << "\nbucket        tags  support  Macro-F1  Hits@1\n";
  auto row = [&out](const GroupReport& g) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-14s%4zu  %7zu    %s  %s\n",
                  g.label.c_str(), g.tag_count, g.support,
                  Percent(g.macro_f1).c_str(), Percent(g.hits_at_1).c_str());
    out << buf;
  };
  for (const auto& g : report.breakdown.buckets) row(g);
  row(report.breakdown.zero_shot);
  out << "\nerror Jaccard histogram\n";
  for (const auto& bin : report.jaccard_histogram) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "[%.2f, %.2f%c %zu\n", bin.lower,
                  bin.upper, bin.upper == 1.0 ? ']' : ')', bin.count);
    out << buf;
  }
  return out.str();
}

}  // namespace xfnl
