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

#ifndef XFNL_CORPUS_H_
#define XFNL_CORPUS_H_

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace xfnl {

// Reserved tag for numerals that carry no XBRL concept. Its documentation is
// the same literal.
inline constexpr std::string_view kOthersTag = "others";

enum class Split { kTrain, kValidation, kTest };

std::string_view SplitName(Split split);
std::optional<Split> ParseSplit(std::string_view name);

// A gold numeral span. Offsets count Unicode scalar values of the statement
// text, end exclusive.
struct NumeralMention {
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string gold_tag;

  bool operator==(const NumeralMention&) const = default;
};

struct Statement {
  std::string sid;
  std::string text;
  std::vector<NumeralMention> mentions;
  Split split = Split::kTrain;

  bool operator==(const Statement&) const = default;
};

struct TagRecord {
  std::string tag_id;
  std::string documentation;

  bool operator==(const TagRecord&) const = default;
};

// Bijective tag <-> documentation registry. Always contains the OTHERS entry;
// it is added when the source file omits it.
class Taxonomy {
 public:
  Taxonomy() : Taxonomy(std::vector<TagRecord>{}) {}
  explicit Taxonomy(std::vector<TagRecord> records);

  // One {"tag": ..., "documentation": ...} object per line.
  static Taxonomy Parse(std::string_view bytes);
  std::string Serialize() const;

  // Records sorted ascending by tag_id.
  const std::vector<TagRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  // Lookups normalize their argument first.
  const TagRecord* Find(std::string_view tag_id) const;
  const TagRecord& Get(std::string_view tag_id) const;
  std::optional<std::string> TagForDocumentation(
      std::string_view documentation) const;

 private:
  std::vector<TagRecord> records_;
  std::map<std::string, std::size_t, std::less<>> by_tag_;
  std::map<std::string, std::size_t, std::less<>> by_documentation_;
};

struct CorpusOptions {
  // Whether OTHERS gold mentions are counted in the train tag frequency.
  bool count_others_in_frequency = true;
};

class Corpus {
 public:
  Corpus(std::vector<Statement> statements, Taxonomy taxonomy,
         CorpusOptions options = {});

  // Parses and validates the line-delimited dataset and taxonomy files.
  static Corpus Parse(std::string_view dataset_bytes,
                      std::string_view taxonomy_bytes,
                      CorpusOptions options = {});
  static Corpus Load(const std::string& dataset_path,
                     const std::string& taxonomy_path,
                     CorpusOptions options = {});

  std::string SerializeDataset() const;

  const std::vector<Statement>& statements() const { return statements_; }
  const Taxonomy& taxonomy() const { return taxonomy_; }
  const std::map<std::string, std::size_t>& tag_frequency() const {
    return tag_frequency_;
  }
  std::size_t TrainFrequency(std::string_view tag_id) const;
  const Statement* FindStatement(std::string_view sid) const;

 private:
  std::vector<Statement> statements_;
  Taxonomy taxonomy_;
  std::map<std::string, std::size_t> tag_frequency_;
  std::map<std::string, std::size_t, std::less<>> by_sid_;
};

// Tags that are gold in the test split but never gold in train or validation.
// OTHERS is never zero-shot.
std::set<std::string> ZeroShotTags(const Corpus& corpus);

// Upper-inclusive frequency bucket bounds. The default {5, 10, 50, 100}
// yields the buckets zero-shot, 1–5, 6–10, 11–50, 51–100, >100.
class BucketEdges {
 public:
  BucketEdges() : BucketEdges(std::vector<std::size_t>{5, 10, 50, 100}) {}
  explicit BucketEdges(std::vector<std::size_t> upper_bounds);

  const std::vector<std::size_t>& upper_bounds() const { return bounds_; }

  // All labels in ascending frequency order, starting with "zero-shot".
  std::vector<std::string> Labels() const;

 private:
  std::vector<std::size_t> bounds_;
};

inline constexpr std::string_view kZeroShotBucket = "zero-shot";

std::string FrequencyBucket(std::size_t count, const BucketEdges& edges);

std::string ReadFile(const std::string& path);

}  // namespace xfnl

#endif  // XFNL_CORPUS_H_
