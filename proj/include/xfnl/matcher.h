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

#ifndef XFNL_MATCHER_H_
#define XFNL_MATCHER_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xfnl/backends.h"
#include "xfnl/corpus.h"
#include "xfnl/prompting.h"

namespace xfnl {

struct RankedTag {
  std::string tag_id;
  double score = 0.0;

  bool operator==(const RankedTag&) const = default;
};

// Ranked descending by score; equal scores ordered ascending by tag_id.
struct Prediction {
  std::vector<RankedTag> ranked;
  std::string query_text;

  const std::string& top1() const { return ranked.front().tag_id; }
  bool operator==(const Prediction&) const = default;
};

// Immutable matrix of unit-norm tag embeddings, one row per tag, rows in
// ascending tag_id order. In kTagWords mode the rows embed tag names rather
// than documentations.
class TagIndex {
 public:
  // Rows are normalized here; tags may come in any order.
  TagIndex(std::vector<std::string> tags, std::vector<EmbeddingVector> rows,
           TargetKind source = TargetKind::kDocumentation);

  static TagIndex Build(const Taxonomy& taxonomy, EmbeddingBackend& backend,
                        TargetKind source = TargetKind::kDocumentation);

  // Line-delimited {"tag": ..., "vector": [...]}; must cover the taxonomy.
  static TagIndex FromPrecomputed(std::string_view bytes,
                                  const Taxonomy& taxonomy,
                                  TargetKind source = TargetKind::kDocumentation);

  // Cache layout: one JSON header line {"dim", "tags", "source"} followed by
  // row-major little-endian float32 values. Rows are renormalized on load.
  std::string SerializeCache() const;
  static TagIndex ParseCache(std::string_view bytes);
  void WriteCache(const std::string& path) const;
  static TagIndex ReadCache(const std::string& path);

  const std::vector<std::string>& tags() const { return tags_; }
  std::size_t size() const { return tags_.size(); }
  std::size_t dim() const { return dim_; }
  TargetKind source() const { return source_; }
  std::span<const double> row(std::size_t i) const {
    return {matrix_.data() + i * dim_, dim_};
  }
  std::optional<std::size_t> Find(std::string_view tag_id) const;

  // True when the rows are exactly the taxonomy's tags.
  bool Covers(const Taxonomy& taxonomy) const;

 private:
  std::vector<std::string> tags_;
  std::vector<double> matrix_;
  std::size_t dim_ = 0;
  TargetKind source_;
};

// (a . b) / (|a| |b|) clamped to [-1, 1].
double Cosine(std::span<const double> a, std::span<const double> b);

// Exact top-k scan with a bounded heap. `exclude` removes one row from
// consideration. k is clamped to the number of candidate rows.
Prediction RankQuery(const TagIndex& index, std::span<const double> query,
                     std::size_t k, std::string query_text = {},
                     std::optional<std::size_t> exclude = std::nullopt);

// "other" / "others" after normalization.
bool IsOthersText(std::string_view text);

// Resolves generated text to a ranking. Text reading "others" short-circuits
// to OTHERS at score 1.0, followed by the best k - 1 remaining tags.
Prediction Match(const TagIndex& index, const GeneratedOutput& generated,
                 EmbeddingBackend& backend, std::size_t k);

// Inverse of the taxonomy's tag -> documentation map.
std::string ResolveTag(const Taxonomy& taxonomy,
                       std::string_view documentation);

}  // namespace xfnl

#endif  // XFNL_MATCHER_H_
