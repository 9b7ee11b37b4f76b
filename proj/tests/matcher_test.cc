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
#include <cmath>
#include <random>
#include <set>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "support/synthetic.h"
#include "xfnl/error.h"
#include "xfnl/text.h"

namespace xfnl {
namespace {

using ::testing::ElementsAre;

const Taxonomy& ShareTaxonomy() {
  static const Taxonomy taxonomy(testing::ShareCountTags());
  return taxonomy;
}

std::vector<double> Vec(std::initializer_list<double> v) { return v; }

// Full sort over every row: score descending, then tag ascending.
std::vector<RankedTag> BruteForceTopK(const TagIndex& index,
                                      std::vector<double> query, std::size_t k) {
  double norm = 0;
  for (double x : query) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : query) x /= norm;
  std::vector<RankedTag> all;
  for (std::size_t i = 0; i < index.size(); ++i) {
    double dot = 0;
    const auto row = index.row(i);
    for (std::size_t d = 0; d < row.size(); ++d) dot += query[d] * row[d];
    all.push_back({index.tags()[i], std::clamp(dot, -1.0, 1.0)});
  }
  std::sort(all.begin(), all.end(), [](const RankedTag& a, const RankedTag& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tag_id < b.tag_id;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

TEST(Cosine, ClosedForms) {
  EXPECT_DOUBLE_EQ(Cosine(Vec({1, 2, 3}), Vec({1, 2, 3})), 1.0);
  EXPECT_EQ(Cosine(Vec({1, 0}), Vec({0, 1})), 0.0);
  EXPECT_NEAR(Cosine(Vec({1, 0}), Vec({1, 1})), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(Cosine(Vec({1, 0}), Vec({-3, 0})), -1.0);
  EXPECT_EQ(testing::ErrorCodeOf([] { Cosine(Vec({1}), Vec({1, 0})); }),
            ErrorCode::kDimensionMismatch);
  EXPECT_EQ(testing::ErrorCodeOf([] { Cosine(Vec({0, 0}), Vec({1, 0})); }),
            ErrorCode::kZeroNorm);
}

TEST(Cosine, ScaleInvariantAndBounded) {
  std::mt19937_64 rng(2);
  auto draw = [&] { return static_cast<double>(UniformBelow(rng, 2001)) - 1000.0; };
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(7), b(7);
    for (auto& x : a) x = draw();
    for (auto& x : b) x = draw();
    a[0] += 0.5;  // never the zero vector
    const double c = Cosine(a, b);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    auto scaled = a;
    for (auto& x : scaled) x *= 3.75;
    EXPECT_NEAR(Cosine(scaled, b), c, 1e-12);
    EXPECT_EQ(Cosine(a, b), Cosine(b, a));
  }
}

TEST(TagIndex, ShareCountTaxonomyHasThreeUnitRows) {
  TestEmbedder embedder(4096, 1);
  const TagIndex index = TagIndex::Build(ShareTaxonomy(), embedder);
  ASSERT_EQ(index.size(), 3);
  EXPECT_THAT(index.tags(), ElementsAre("common stocks shares authorized",
                                        "common stocks shares issued", "others"));
  for (std::size_t i = 0; i < index.size(); ++i) {
    double n = 0;
    for (double x : index.row(i)) n += x * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
  }
  EXPECT_TRUE(index.Covers(ShareTaxonomy()));
}

TEST(TagIndex, RebuildIsBitIdentical) {
  TestEmbedder a(512, 9);
  TestEmbedder b(512, 9);
  const Corpus corpus = testing::MakeSyntheticCorpus({.seed = 2});
  const TagIndex x = TagIndex::Build(corpus.taxonomy(), a);
  const TagIndex y = TagIndex::Build(corpus.taxonomy(), b);
  EXPECT_EQ(x.SerializeCache(), y.SerializeCache());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_TRUE(std::equal(x.row(i).begin(), x.row(i).end(), y.row(i).begin()));
  }
}

TEST(TagIndex, ConstructionErrors) {
  EXPECT_EQ(testing::ErrorCodeOf([] { TagIndex({}, {}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(testing::ErrorCodeOf([] {
              TagIndex({"a", "a"}, {{{1, 0}}, {{0, 1}}});
            }),
            ErrorCode::kDuplicateTag);
  EXPECT_EQ(testing::ErrorCodeOf([] { TagIndex({"a", "b"}, {{{1, 0}}, {{0, 0}}}); }),
            ErrorCode::kZeroNorm);
  EXPECT_EQ(testing::ErrorCodeOf([] { TagIndex({"a", "b"}, {{{1, 0}}, {{1}}}); }),
            ErrorCode::kDimensionMismatch);
  const TagIndex index({"a"}, {{{1, 0}}});
  EXPECT_EQ(testing::ErrorCodeOf([&] { RankQuery(index, Vec({1, 0, 0}), 1); }),
            ErrorCode::kDimensionMismatch);
}

TEST(TagIndex, CacheRoundTrip) {
  TestEmbedder embedder(64, 4);
  const TagIndex index =
      TagIndex::Build(ShareTaxonomy(), embedder, TargetKind::kTagWords);
  const std::string path = testing::TempPath("index.cache");
  index.WriteCache(path);
  const TagIndex loaded = TagIndex::ReadCache(path);
  EXPECT_EQ(loaded.tags(), index.tags());
  EXPECT_EQ(loaded.dim(), 64);
  EXPECT_EQ(loaded.source(), TargetKind::kTagWords);
  for (std::size_t i = 0; i < index.size(); ++i) {
    for (std::size_t d = 0; d < index.dim(); ++d) {
      EXPECT_NEAR(loaded.row(i)[d], index.row(i)[d], 1e-6);
    }
  }
  // float32 storage is a fixed point after one round trip.
  EXPECT_EQ(TagIndex::ParseCache(loaded.SerializeCache()).SerializeCache(),
            loaded.SerializeCache());

  std::string truncated = index.SerializeCache();
  truncated.pop_back();
  EXPECT_EQ(testing::ErrorCodeOf([&] { TagIndex::ParseCache(truncated); }),
            ErrorCode::kMalformedRecord);
  EXPECT_EQ(testing::ErrorCodeOf([] { TagIndex::ParseCache("{}"); }),
            ErrorCode::kMalformedRecord);
}

TEST(TagIndex, FromPrecomputed) {
  const std::string lines =
      R"({"tag": "others", "vector": [0, 0, 1]})" "\n"
      R"({"tag": "Common Stocks Shares Issued", "vector": [0, 2, 0]})" "\n"
      R"({"tag": "common stocks shares authorized", "vector": [3, 0, 0]})" "\n";
  const TagIndex index = TagIndex::FromPrecomputed(lines, ShareTaxonomy());
  EXPECT_TRUE(index.Covers(ShareTaxonomy()));
  EXPECT_EQ(index.row(1)[1], 1.0);
  const auto first_two = lines.substr(0, lines.rfind('{'));
  EXPECT_EQ(testing::ErrorCodeOf(
                [&] { TagIndex::FromPrecomputed(first_two, ShareTaxonomy()); }),
            ErrorCode::kMalformedRecord);
  EXPECT_EQ(testing::ErrorCodeOf([&] {
              TagIndex::FromPrecomputed(R"({"tag": "revenues", "vector": [1]})",
                                        ShareTaxonomy());
            }),
            ErrorCode::kUnknownTag);
}

TEST(Match, SelfMatchScoresOne) {
  TestEmbedder embedder(4096, 1);
  const Corpus corpus = testing::MakeSyntheticCorpus({.seed = 6});
  const TagIndex index = TagIndex::Build(corpus.taxonomy(), embedder);
  for (const auto& r : corpus.taxonomy().records()) {
    if (r.tag_id == "others") continue;
    const Prediction p = Match(index, {r.documentation}, embedder, 3);
    ASSERT_EQ(p.ranked.size(), 3);
    EXPECT_EQ(p.top1(), r.tag_id);
    EXPECT_NEAR(p.ranked[0].score, 1.0, 1e-12);
    EXPECT_EQ(p.query_text, r.documentation);
  }
}

TEST(Match, OthersShortCircuits) {
  TestEmbedder embedder(4096, 1);
  const TagIndex index = TagIndex::Build(ShareTaxonomy(), embedder);
  for (const std::string text : {"others", " Others ", "other"}) {
    const Prediction p = Match(index, {text}, embedder, 3);
    ASSERT_EQ(p.ranked.size(), 3);
    EXPECT_EQ(p.top1(), "others");
    EXPECT_EQ(p.ranked[0].score, 1.0);
    EXPECT_NE(p.ranked[1].tag_id, "others");
    EXPECT_NE(p.ranked[2].tag_id, "others");
  }
  EXPECT_THAT(Match(index, {"others"}, embedder, 1).ranked,
              ElementsAre(RankedTag{"others", 1.0}));
}

TEST(Match, KIsClampedAndZeroRejected) {
  TestEmbedder embedder(64, 1);
  const TagIndex index = TagIndex::Build(ShareTaxonomy(), embedder);
  const std::string doc = ShareTaxonomy().records()[0].documentation;
  EXPECT_EQ(Match(index, {doc}, embedder, 10).ranked.size(), 3);
  EXPECT_EQ(testing::ErrorCodeOf([&] { Match(index, {doc}, embedder, 0); }),
            ErrorCode::kInvalidArgument);
}

TEST(Match, OneWordDeletionKeepsGoldFirst) {
  TestEmbedder embedder(4096, 1);
  const TagIndex index = TagIndex::Build(ShareTaxonomy(), embedder);
  for (const auto& r : ShareTaxonomy().records()) {
    if (r.tag_id == "others") continue;
    const auto words = SplitWhitespace(r.documentation);
    for (std::size_t drop = 0; drop < words.size(); ++drop) {
      auto rest = words;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(drop));
      const Prediction p = Match(index, {JoinWords(rest)}, embedder, 3);
      EXPECT_EQ(p.top1(), r.tag_id) << "dropped '" << words[drop] << "'";
      // Brute force over both rows agrees.
      const auto q = Embed(embedder, std::vector<std::string>{JoinWords(rest)});
      const double gold = Cosine(q[0].values, index.row(*index.Find(r.tag_id)));
      for (const auto& other : ShareTaxonomy().records()) {
        if (other.tag_id == r.tag_id) continue;
        EXPECT_GT(gold, Cosine(q[0].values, index.row(*index.Find(other.tag_id))));
      }
    }
  }
}

TEST(Match, DeletingWordsFollowsSquareRootLaw) {
  TestEmbedder embedder(4096, 3);
  const std::vector<std::string> words = {"alpha", "bravo", "charlie", "delta",
                                          "echo",  "foxtrot", "golf", "hotel",
                                          "india", "juliet"};
  std::set<std::size_t> buckets;
  for (const auto& w : words) buckets.insert(embedder.BucketOf(w));
  ASSERT_EQ(buckets.size(), words.size());
  const TagIndex index({"t"}, Embed(embedder, std::vector<std::string>{JoinWords(words)}));
  double previous = 2.0;
  const double n = static_cast<double>(words.size());
  for (std::size_t j = 0; j < words.size(); ++j) {
    const std::vector<std::string> rest(words.begin() + static_cast<std::ptrdiff_t>(j),
                                        words.end());
    const double score = Match(index, {JoinWords(rest)}, embedder, 1).ranked[0].score;
    EXPECT_NEAR(score, std::sqrt((n - static_cast<double>(j)) / n), 1e-12);
    EXPECT_LT(score, previous);
    previous = score;
  }
}

TEST(RankQuery, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int instance = 0; instance < 200; ++instance) {
    const std::size_t n = 1 + UniformBelow(rng, 64);
    const std::size_t dim = 1 + UniformBelow(rng, 32);
    std::vector<std::string> tags;
    std::vector<EmbeddingVector> rows;
    for (std::size_t i = 0; i < n; ++i) {
      tags.push_back("t" + std::to_string(UniformBelow(rng, 1000000)) + "_" +
                     std::to_string(i));
      EmbeddingVector v;
      if (i > 0 && UniformBelow(rng, 4) == 0) {
        v = rows[UniformBelow(rng, i)];  // exact duplicate row forces a tie
      } else {
        do {
          v.values.assign(dim, 0.0);
          for (auto& x : v.values) x = static_cast<double>(UniformBelow(rng, 7)) - 3.0;
        } while (std::all_of(v.values.begin(), v.values.end(),
                             [](double x) { return x == 0.0; }));
      }
      rows.push_back(v);
    }
    const TagIndex index(tags, rows);
    std::vector<double> query(dim);
    do {
      for (auto& x : query) x = static_cast<double>(UniformBelow(rng, 7)) - 3.0;
    } while (std::all_of(query.begin(), query.end(), [](double x) { return x == 0.0; }));
    const std::size_t k = 1 + UniformBelow(rng, n + 2);
    const auto got = RankQuery(index, query, k).ranked;
    EXPECT_EQ(got, BruteForceTopK(index, query, k)) << "instance " << instance;
    // Exact scores equal the plain cosine up to rounding.
    for (const auto& r : got) {
      EXPECT_NEAR(r.score, Cosine(query, rows[std::find(tags.begin(), tags.end(), r.tag_id) - tags.begin()].values), 1e-12);
    }
  }
}

TEST(RankQuery, ExcludeSkipsRow) {
  const TagIndex index({"a", "b", "c"}, {{{1, 0}}, {{1, 0.1}}, {{0, 1}}});
  const auto p = RankQuery(index, Vec({1, 0}), 3, "", 0);
  ASSERT_EQ(p.ranked.size(), 2);
  EXPECT_EQ(p.ranked[0].tag_id, "b");
  EXPECT_EQ(p.ranked[1].tag_id, "c");
}

TEST(RankQuery, TiesBreakByTagId) {
  const TagIndex index({"zeta", "alpha", "mid"}, {{{1, 0}}, {{1, 0}}, {{1, 0}}});
  const auto p = RankQuery(index, Vec({2, 0}), 3);
  EXPECT_EQ(p.ranked[0].tag_id, "alpha");
  EXPECT_EQ(p.ranked[1].tag_id, "mid");
  EXPECT_EQ(p.ranked[2].tag_id, "zeta");
}

TEST(ResolveTag, Examples) {
  EXPECT_EQ(ResolveTag(ShareTaxonomy(),
                       "The maximum number of common shares permitted to be "
                       "issued by an entity's charter and bylaws."),
            "common stocks shares authorized");
  EXPECT_EQ(ResolveTag(ShareTaxonomy(), "others"), "others");
  EXPECT_EQ(testing::ErrorCodeOf([] { ResolveTag(ShareTaxonomy(), "revenue"); }),
            ErrorCode::kUnknownDocumentation);
}

}  // namespace
}  // namespace xfnl
