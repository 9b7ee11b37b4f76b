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

#include "xfnl/matcher.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <queue>

#include "json.hpp"
#include "spdlog/spdlog.h"
#include "xfnl/error.h"
#include "xfnl/text.h"

namespace xfnl {
namespace {

using nlohmann::json;

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Clamp(double x) { return std::clamp(x, -1.0, 1.0); }

// Strict "ranks before" order: higher score first, then smaller tag_id.
struct RanksBefore {
  bool operator()(const RankedTag& a, const RankedTag& b) const {
    if (a.score != b.score) return a.score > b.score;
    return a.tag_id < b.tag_id;
  }
};

void Normalize(std::vector<double>& v) {
  const double norm = std::sqrt(Dot(v, v));
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::kZeroNorm, "cannot normalize zero vector");
  }
  for (double& x : v) x /= norm;
}

void AppendFloatLE(std::string& out, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

float ReadFloatLE(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) {
    bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  }
  return std::bit_cast<float>(bits);
}

TargetKind ParseSource(const json& header) {
  const auto it = header.find("source");
  if (it == header.end()) return TargetKind::kDocumentation;
  if (*it == "documentation") return TargetKind::kDocumentation;
  if (*it == "tag_words") return TargetKind::kTagWords;
  throw Error(ErrorCode::kMalformedRecord, "unknown index source");
}

}  // namespace

TagIndex::TagIndex(std::vector<std::string> tags,
                   std::vector<EmbeddingVector> rows, TargetKind source)
    : source_(source) {
  if (tags.empty()) throw Error(ErrorCode::kInvalidArgument, "empty index");
  if (tags.size() != rows.size()) {
    throw Error(ErrorCode::kInvalidArgument, "tag and row counts differ");
  }
  dim_ = rows.front().dim();
  if (dim_ == 0) throw Error(ErrorCode::kDimensionMismatch, "dim is 0");
  std::vector<std::size_t> order(tags.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return tags[a] < tags[b]; });
  tags_.reserve(tags.size());
  matrix_.reserve(tags.size() * dim_);
  for (std::size_t i : order) {
    if (!tags_.empty() && tags_.back() == tags[i]) {
      throw Error(ErrorCode::kDuplicateTag, tags[i]);
    }
    auto& values = rows[i].values;
    if (values.size() != dim_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "row for '" + tags[i] + "' has dim " +
                      std::to_string(values.size()));
    }
    try {
      Normalize(values);
    } catch (const Error&) {
      throw Error(ErrorCode::kZeroNorm,
                  "embedding of '" + tags[i] + "' is the zero vector");
    }
    tags_.push_back(std::move(tags[i]));
    matrix_.insert(matrix_.end(), values.begin(), values.end());
  }
}

TagIndex TagIndex::Build(const Taxonomy& taxonomy, EmbeddingBackend& backend,
                         TargetKind source) {
  std::vector<std::string> tags;
  std::vector<std::string> texts;
  for (const auto& r : taxonomy.records()) {
    tags.push_back(r.tag_id);
    texts.push_back(source == TargetKind::kDocumentation ? r.documentation
                                                         : r.tag_id);
  }
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "empty taxonomy");
  return TagIndex(std::move(tags), Embed(backend, texts), source);
}

TagIndex TagIndex::FromPrecomputed(std::string_view bytes,
                                   const Taxonomy& taxonomy,
                                   TargetKind source) {
  std::vector<std::string> tags;
  std::vector<EmbeddingVector> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    const auto line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      const json rec = json::parse(line);
      const std::string tag = NormalizeSpacing(rec.at("tag").get<std::string>());
      if (taxonomy.Find(tag) == nullptr) {
        throw Error(ErrorCode::kUnknownTag,
                    "line " + std::to_string(line_no) + ": " + tag);
      }
      tags.push_back(tag);
      rows.push_back({rec.at("vector").get<std::vector<double>>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  TagIndex index(std::move(tags), std::move(rows), source);
  if (!index.Covers(taxonomy)) {
    throw Error(ErrorCode::kMalformedRecord,
                "precomputed embeddings do not cover the taxonomy");
  }
  return index;
}

std::string TagIndex::SerializeCache() const {
  std::string out =
      json{{"dim", dim_},
           {"tags", tags_},
           {"source", TargetKindName(source_)}}
          .dump();
  out.push_back('\n');
  out.reserve(out.size() + matrix_.size() * 4);
  for (double x : matrix_) AppendFloatLE(out, static_cast<float>(x));
  return out;
}

TagIndex TagIndex::ParseCache(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) {
    throw Error(ErrorCode::kMalformedRecord, "index cache lacks a header");
  }
  json header;
  std::size_t dim = 0;
  std::vector<std::string> tags;
  try {
    header = json::parse(bytes.substr(0, nl));
    dim = header.at("dim").get<std::size_t>();
    tags = header.at("tags").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("index cache header: ") + e.what());
  }
  const auto body = bytes.substr(nl + 1);
  if (body.size() != tags.size() * dim * 4) {
    throw Error(ErrorCode::kMalformedRecord,
                "index cache body has " + std::to_string(body.size()) +
                    " bytes, expected " + std::to_string(tags.size() * dim * 4));
  }
  std::vector<EmbeddingVector> rows(tags.size());
  for (std::size_t r = 0; r < tags.size(); ++r) {
    rows[r].values.resize(dim);
    for (std::size_t c = 0; c < dim; ++c) {
      rows[r].values[c] = ReadFloatLE(body.data() + (r * dim + c) * 4);
    }
  }
  return TagIndex(std::move(tags), std::move(rows), ParseSource(header));
}

void TagIndex::WriteCache(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  const std::string bytes = SerializeCache();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TagIndex TagIndex::ReadCache(const std::string& path) {
  return ParseCache(ReadFile(path));
}

std::optional<std::size_t> TagIndex::Find(std::string_view tag_id) const {
  auto it = std::lower_bound(tags_.begin(), tags_.end(), tag_id);
  if (it == tags_.end() || *it != tag_id) return std::nullopt;
  return static_cast<std::size_t>(it - tags_.begin());
}

bool TagIndex::Covers(const Taxonomy& taxonomy) const {
  if (taxonomy.size() != tags_.size()) return false;
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (taxonomy.records()[i].tag_id != tags_[i]) return false;
  }
  return true;
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const double na = std::sqrt(Dot(a, a));
  const double nb = std::sqrt(Dot(b, b));
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw Error(ErrorCode::kZeroNorm, "cosine of a zero vector");
  }
  return Clamp(Dot(a, b) / (na * nb));
}

Prediction RankQuery(const TagIndex& index, std::span<const double> query,
                     std::size_t k, std::string query_text,
                     std::optional<std::size_t> exclude) {
  if (query.size() != index.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query dim " + std::to_string(query.size()) + ", index dim " +
                    std::to_string(index.dim()));
  }
  std::vector<double> unit(query.begin(), query.end());
  Normalize(unit);

  const std::size_t candidates = index.size() - (exclude ? 1 : 0);
  k = std::min(k, candidates);
  // Max-heap under RanksBefore: the top is the weakest kept entry.
  std::priority_queue<RankedTag, std::vector<RankedTag>, RanksBefore> heap;
  const RanksBefore before;
  for (std::size_t i = 0; i < index.size() && k > 0; ++i) {
    if (exclude && *exclude == i) continue;
    RankedTag cand{index.tags()[i], Clamp(Dot(unit, index.row(i)))};
    if (heap.size() < k) {
      heap.push(std::move(cand));
    } else if (before(cand, heap.top())) {
      heap.pop();
      heap.push(std::move(cand));
    }
  }
  Prediction p;
  p.query_text = std::move(query_text);
  p.ranked.resize(heap.size());
  for (std::size_t i = heap.size(); i-- > 0;) {
    p.ranked[i] = heap.top();
    heap.pop();
  }
  return p;
}

bool IsOthersText(std::string_view text) {
  const std::string n = NormalizeSpacing(text);
  return n == "other" || n == "others";
}

Prediction Match(const TagIndex& index, const GeneratedOutput& generated,
                 EmbeddingBackend& backend, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (generated.text.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "generated text is empty");
  }
  if (k > index.size()) {
    spdlog::warn("k={} exceeds index size {}; clamping", k, index.size());
    k = index.size();
  }
  const auto others = index.Find(kOthersTag);
  if (others && IsOthersText(generated.text)) {
    Prediction p;
    p.query_text = generated.text;
    p.ranked.push_back({std::string(kOthersTag), 1.0});
    if (k > 1) {
      const std::string texts[] = {generated.text};
      const auto query = Embed(backend, texts);
      auto rest = RankQuery(index, query.front().values, k - 1, {}, others);
      for (auto& r : rest.ranked) p.ranked.push_back(std::move(r));
    }
    return p;
  }
  const std::string texts[] = {generated.text};
  const auto query = Embed(backend, texts);
  return RankQuery(index, query.front().values, k, generated.text);
}

std::string ResolveTag(const Taxonomy& taxonomy,
                       std::string_view documentation) {
  auto tag = taxonomy.TagForDocumentation(documentation);
  if (!tag) {
    throw Error(ErrorCode::kUnknownDocumentation, std::string(documentation));
  }
  return *std::move(tag);
}

}  // namespace xfnl
