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

#include "xfnl/corpus.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xfnl/error.h"
#include "xfnl/text.h"

namespace xfnl {
namespace {

using nlohmann::json;

std::string LineError(std::size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

// Calls `fn(line_no, record)` for every non-blank line.
template <typename Fn>
void ForEachJsonLine(std::string_view bytes, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    std::string_view line = bytes.substr(pos, nl - pos);
    ++line_no;
    pos = nl + 1;
    if (Trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kMalformedRecord, LineError(line_no, e.what()));
    }
    if (!record.is_object()) {
      throw Error(ErrorCode::kMalformedRecord,
                  LineError(line_no, "record is not an object"));
    }
    fn(line_no, record);
  }
}

const std::string& RequireString(const json& record, const char* key,
                                 std::size_t line_no) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw Error(ErrorCode::kMalformedRecord,
                LineError(line_no, std::string("missing string field '") +
                                       key + "'"));
  }
  return it->get_ref<const std::string&>();
}

std::size_t RequireOffset(const json& record, const char* key,
                          std::size_t line_no) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_number_integer() ||
      it->get<long long>() < 0) {
    throw Error(ErrorCode::kMalformedRecord,
                LineError(line_no, std::string("field '") + key +
                                       "' must be a non-negative integer"));
  }
  return it->get<std::size_t>();
}

bool HasDigit(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

// Checks the span invariants of one statement; `where` prefixes messages.
void ValidateMentions(const Statement& st, const std::string& where) {
  const auto length = Utf8Length(st.text);
  if (!length) {
    throw Error(ErrorCode::kMalformedRecord, where + "text is not UTF-8");
  }
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const auto& m : st.mentions) {
    if (m.start >= m.end || m.end > *length) {
      throw Error(ErrorCode::kSpanMismatch,
                  where + "span [" + std::to_string(m.start) + ", " +
                      std::to_string(m.end) + ") invalid for text of length " +
                      std::to_string(*length));
    }
    const std::size_t b = *Utf8ByteOffset(st.text, m.start);
    const std::size_t e = *Utf8ByteOffset(st.text, m.end);
    if (std::string_view(st.text).substr(b, e - b) != m.surface) {
      throw Error(ErrorCode::kSpanMismatch,
                  where + "surface '" + m.surface + "' does not match text '" +
                      st.text.substr(b, e - b) + "'");
    }
    if (!HasDigit(m.surface)) {
      throw Error(ErrorCode::kMalformedRecord,
                  where + "surface '" + m.surface + "' has no digit");
    }
    spans.emplace_back(m.start, m.end);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) {
      throw Error(ErrorCode::kMalformedRecord, where + "overlapping mentions");
    }
  }
}

Statement ParseStatement(const json& record, std::size_t line_no) {
  Statement st;
  st.sid = RequireString(record, "sid", line_no);
  const auto split = ParseSplit(RequireString(record, "split", line_no));
  if (!split) {
    throw Error(ErrorCode::kMalformedRecord,
                LineError(line_no, "unknown split"));
  }
  st.split = *split;
  st.text = RequireString(record, "text", line_no);
  auto numerals = record.find("numerals");
  if (numerals == record.end() || !numerals->is_array()) {
    throw Error(ErrorCode::kMalformedRecord,
                LineError(line_no, "missing array field 'numerals'"));
  }
  for (const auto& n : *numerals) {
    if (!n.is_object()) {
      throw Error(ErrorCode::kMalformedRecord,
                  LineError(line_no, "numeral is not an object"));
    }
    NumeralMention m;
    m.surface = RequireString(n, "surface", line_no);
    m.start = RequireOffset(n, "start", line_no);
    m.end = RequireOffset(n, "end", line_no);
    m.gold_tag = NormalizeSpacing(RequireString(n, "tag", line_no));
    st.mentions.push_back(std::move(m));
  }
  return st;
}

}  // namespace

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "train";
}

std::optional<Split> ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

Taxonomy::Taxonomy(std::vector<TagRecord> records) {
  bool has_others = false;
  for (auto& r : records) {
    r.tag_id = NormalizeSpacing(r.tag_id);
    r.documentation = std::string(Trim(r.documentation));
    if (r.tag_id.empty() || r.documentation.empty()) {
      throw Error(ErrorCode::kMalformedRecord,
                  "tag and documentation must be nonempty");
    }
    if (r.tag_id == kOthersTag) {
      if (r.documentation != kOthersTag) {
        throw Error(ErrorCode::kMalformedRecord,
                    "the 'others' tag must have documentation 'others'");
      }
      has_others = true;
    }
  }
  if (!has_others) {
    records.push_back({std::string(kOthersTag), std::string(kOthersTag)});
  }
  std::sort(records.begin(), records.end(),
            [](const TagRecord& a, const TagRecord& b) {
              return a.tag_id < b.tag_id;
            });
  records_ = std::move(records);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!by_tag_.emplace(r.tag_id, i).second) {
      throw Error(ErrorCode::kDuplicateTag, r.tag_id);
    }
    if (!by_documentation_.emplace(NormalizeSpacing(r.documentation), i)
             .second) {
      throw Error(ErrorCode::kDuplicateDocumentation, r.documentation);
    }
  }
}

Taxonomy Taxonomy::Parse(std::string_view bytes) {
  std::vector<TagRecord> records;
  std::set<std::string> seen;
  ForEachJsonLine(bytes, [&](std::size_t line_no, const json& record) {
    TagRecord r{RequireString(record, "tag", line_no),
                RequireString(record, "documentation", line_no)};
    if (!seen.insert(NormalizeSpacing(r.tag_id)).second) {
      throw Error(ErrorCode::kDuplicateTag,
                  LineError(line_no, NormalizeSpacing(r.tag_id)));
    }
    records.push_back(std::move(r));
  });
  return Taxonomy(std::move(records));
}

std::string Taxonomy::Serialize() const {
  std::string out;
  for (const auto& r : records_) {
    out += json{{"tag", r.tag_id}, {"documentation", r.documentation}}.dump();
    out += '\n';
  }
  return out;
}

const TagRecord* Taxonomy::Find(std::string_view tag_id) const {
  auto it = by_tag_.find(NormalizeSpacing(tag_id));
  return it == by_tag_.end() ? nullptr : &records_[it->second];
}

const TagRecord& Taxonomy::Get(std::string_view tag_id) const {
  const TagRecord* r = Find(tag_id);
  if (r == nullptr) throw Error(ErrorCode::kUnknownTag, std::string(tag_id));
  return *r;
}

std::optional<std::string> Taxonomy::TagForDocumentation(
    std::string_view documentation) const {
  auto it = by_documentation_.find(NormalizeSpacing(documentation));
  if (it == by_documentation_.end()) return std::nullopt;
  return records_[it->second].tag_id;
}

Corpus::Corpus(std::vector<Statement> statements, Taxonomy taxonomy,
               CorpusOptions options)
    : statements_(std::move(statements)), taxonomy_(std::move(taxonomy)) {
  for (std::size_t i = 0; i < statements_.size(); ++i) {
    auto& st = statements_[i];
    const std::string where = "statement '" + st.sid + "': ";
    if (!by_sid_.emplace(st.sid, i).second) {
      throw Error(ErrorCode::kDuplicateSid, st.sid);
    }
    ValidateMentions(st, where);
    for (auto& m : st.mentions) {
      m.gold_tag = NormalizeSpacing(m.gold_tag);
      if (taxonomy_.Find(m.gold_tag) == nullptr) {
        throw Error(ErrorCode::kUnknownTag, where + m.gold_tag);
      }
      if (st.split == Split::kTrain &&
          (options.count_others_in_frequency || m.gold_tag != kOthersTag)) {
        ++tag_frequency_[m.gold_tag];
      }
    }
  }
}

Corpus Corpus::Parse(std::string_view dataset_bytes,
                     std::string_view taxonomy_bytes, CorpusOptions options) {
  Taxonomy taxonomy = Taxonomy::Parse(taxonomy_bytes);
  std::vector<Statement> statements;
  std::set<std::string> sids;
  ForEachJsonLine(dataset_bytes, [&](std::size_t line_no, const json& record) {
    Statement st = ParseStatement(record, line_no);
    const std::string where = LineError(line_no, "");
    if (!sids.insert(st.sid).second) {
      throw Error(ErrorCode::kDuplicateSid, where + st.sid);
    }
    ValidateMentions(st, where);
    for (const auto& m : st.mentions) {
      if (taxonomy.Find(m.gold_tag) == nullptr) {
        throw Error(ErrorCode::kUnknownTag, where + m.gold_tag);
      }
    }
    statements.push_back(std::move(st));
  });
  return Corpus(std::move(statements), std::move(taxonomy), options);
}

Corpus Corpus::Load(const std::string& dataset_path,
                    const std::string& taxonomy_path, CorpusOptions options) {
  return Parse(ReadFile(dataset_path), ReadFile(taxonomy_path), options);
}

std::string Corpus::SerializeDataset() const {
  std::string out;
  for (const auto& st : statements_) {
    json numerals = json::array();
    for (const auto& m : st.mentions) {
      numerals.push_back({{"surface", m.surface},
                          {"start", m.start},
                          {"end", m.end},
                          {"tag", m.gold_tag}});
    }
    out += json{{"sid", st.sid},
                {"split", SplitName(st.split)},
                {"text", st.text},
                {"numerals", std::move(numerals)}}
               .dump();
    out += '\n';
  }
  return out;
}

std::size_t Corpus::TrainFrequency(std::string_view tag_id) const {
  auto it = tag_frequency_.find(NormalizeSpacing(tag_id));
  return it == tag_frequency_.end() ? 0 : it->second;
}

const Statement* Corpus::FindStatement(std::string_view sid) const {
  auto it = by_sid_.find(sid);
  return it == by_sid_.end() ? nullptr : &statements_[it->second];
}

std::set<std::string> ZeroShotTags(const Corpus& corpus) {
  std::set<std::string> seen;
  std::set<std::string> test;
  for (const auto& st : corpus.statements()) {
    for (const auto& m : st.mentions) {
      (st.split == Split::kTest ? test : seen).insert(m.gold_tag);
    }
  }
  std::set<std::string> out;
  for (const auto& t : test) {
    if (t != kOthersTag && !seen.contains(t)) out.insert(t);
  }
  return out;
}

BucketEdges::BucketEdges(std::vector<std::size_t> upper_bounds)
    : bounds_(std::move(upper_bounds)) {
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    if (bounds_[i] == 0 || (i > 0 && bounds_[i] <= bounds_[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bucket edges must be positive and strictly increasing");
    }
  }
}

std::vector<std::string> BucketEdges::Labels() const {
  std::vector<std::string> labels{std::string(kZeroShotBucket)};
  std::size_t lo = 1;
  for (std::size_t hi : bounds_) {
    labels.push_back(lo == hi ? std::to_string(lo)
                              : std::to_string(lo) + "–" +
                                    std::to_string(hi));
    lo = hi + 1;
  }
  labels.push_back(">" + std::to_string(lo - 1));
  return labels;
}

std::string FrequencyBucket(std::size_t count, const BucketEdges& edges) {
  const auto labels = edges.Labels();
  if (count == 0) return labels.front();
  const auto& bounds = edges.upper_bounds();
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (count <= bounds[i]) return labels[i + 1];
  }
  return labels.back();
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace xfnl
