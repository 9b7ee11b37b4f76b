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

#include "support/synthetic.h"

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "xfnl/text.h"

namespace xfnl::testing {
namespace {

const std::vector<std::string>& Vocabulary() {
  static const std::vector<std::string> kWords = {
      "amount",     "asset",      "balance",   "benefit",   "bond",
      "capital",    "carrying",   "cash",      "charge",    "claim",
      "commercial", "common",     "contract",  "cost",      "credit",
      "debt",       "deposit",    "derivative", "dividend", "earnings",
      "employee",   "equity",     "expense",   "exposure",  "fair",
      "fee",        "finance",    "fund",      "gain",      "goodwill",
      "grant",      "hedge",      "impairment", "income",   "instrument",
      "insurance",  "interest",   "inventory", "investment", "lease",
      "liability",  "loan",       "loss",      "margin",    "maturity",
      "minimum",    "obligation", "operating", "option",    "paper",
      "payable",    "payment",    "pension",   "period",    "plan",
      "preferred",  "premium",    "principal", "property",  "provision",
      "purchase",   "rate",       "receivable", "reserve",  "restructuring",
      "revenue",    "securities", "segment",   "settlement", "share",
      "stock",      "subsidiary", "tax",       "term",      "treasury",
      "unit",       "valuation",  "value",     "warrant",   "yield",
  };
  return kWords;
}

// Two-letter code, unique below 676.
std::string Letters(std::size_t i) {
  return {static_cast<char>('a' + (i / 26) % 26), static_cast<char>('a' + i % 26)};
}

double Unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string Surface(std::mt19937_64& rng) {
  const auto whole = 1 + UniformBelow(rng, 999);
  if (UniformBelow(rng, 2) == 0) return std::to_string(whole);
  return std::to_string(whole) + "." + std::to_string(UniformBelow(rng, 10));
}

}  // namespace

Corpus MakeSyntheticCorpus(const SyntheticOptions& options) {
  std::mt19937_64 rng(options.seed);
  const auto& vocab = Vocabulary();

  std::vector<TagRecord> records;
  std::set<std::set<std::string>> used;
  for (std::size_t t = 0; t < options.tags; ++t) {
    std::set<std::string> words;
    do {
      words.clear();
      const std::size_t n = 6 + UniformBelow(rng, 4);
      while (words.size() < n) {
        words.insert(vocab[UniformBelow(rng, vocab.size())]);
      }
    } while (!used.insert(words).second);
    std::vector<std::string> ordered(words.begin(), words.end());
    for (std::size_t i = ordered.size(); i > 1; --i) {
      std::swap(ordered[i - 1], ordered[UniformBelow(rng, i)]);
    }
    std::string doc = JoinWords(ordered);
    doc[0] = static_cast<char>(doc[0] - 'a' + 'A');
    records.push_back({"tag " + Letters(t), doc + "."});
  }

  const std::size_t seen_tags = options.tags - options.zero_shot_tags;
  std::vector<Statement> statements;
  for (std::size_t s = 0; s < options.statements; ++s) {
    Statement st;
    st.sid = "s" + std::to_string(100000 + s);
    const double u = Unit(rng);
    st.split = u < options.test_fraction ? Split::kTest
               : u < options.test_fraction + options.validation_fraction
                   ? Split::kValidation
                   : Split::kTrain;
    const std::size_t n_mentions = 1 + UniformBelow(rng, 3);
    std::set<std::string> surfaces;
    std::size_t offset = 0;
    auto append = [&](const std::string& piece) {
      st.text += piece;
      offset += *Utf8Length(piece);
    };
    append("During the period the company reported");
    for (std::size_t m = 0; m < n_mentions; ++m) {
      std::string surface;
      do {
        surface = Surface(rng);
      } while (!surfaces.insert(surface).second);
      append(UniformBelow(rng, 4) == 0 ? " €" : " $");
      NumeralMention mention;
      mention.surface = surface;
      mention.start = offset;
      append(surface);
      mention.end = offset;
      append(m + 1 == n_mentions ? " million." : " million and");

      const double o = Unit(rng);
      if (o < options.others_rate) {
        mention.gold_tag = std::string(kOthersTag);
      } else if (st.split == Split::kTest && options.zero_shot_tags > 0 &&
                 UniformBelow(rng, 5) == 0) {
        mention.gold_tag =
            records[seen_tags + UniformBelow(rng, options.zero_shot_tags)]
                .tag_id;
      } else {
        // Skewed toward low indices so frequency buckets differ.
        const double r = Unit(rng);
        const auto idx = static_cast<std::size_t>(r * r * seen_tags);
        mention.gold_tag = records[std::min(idx, seen_tags - 1)].tag_id;
      }
      st.mentions.push_back(std::move(mention));
    }
    statements.push_back(std::move(st));
  }
  return Corpus(std::move(statements), Taxonomy(std::move(records)));
}

std::vector<TagRecord> ShareCountTags() {
  return {
      {"common stocks shares issued",
       "Total number of common shares of an entity that have been sold or "
       "granted to shareholders (includes common shares that were issued, "
       "repurchased and remain in the treasury). These shares represent "
       "capital invested by the firm's shareholders and owners, and may be "
       "all or only a portion of the number of shares authorized."},
      {"common stocks shares authorized",
       "The maximum number of common shares permitted to be issued by an "
       "entity's charter and bylaws."},
  };
}

std::string TempPath(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "xfnl_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace xfnl::testing
