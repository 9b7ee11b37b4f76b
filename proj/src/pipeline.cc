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

#include "xfnl/pipeline.h"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "spdlog/spdlog.h"
#include "xfnl/error.h"
#include "xfnl/text.h"

namespace xfnl {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

using MentionKey = std::pair<std::string, std::size_t>;

struct WorkItem {
  PromptGroup group;
  const Statement* statement = nullptr;
};

struct Outcome {
  std::vector<LabeledPrediction> predictions;
  std::vector<MentionFailure> failures;
};

// Completed predictions from an earlier run. A torn final line (crash while
// appending) is skipped.
std::map<MentionKey, LabeledPrediction> ReadJournal(const std::string& path) {
  std::map<MentionKey, LabeledPrediction> done;
  std::ifstream in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      auto p = PredictionFromJson(line);
      MentionKey key{p.sid, p.mention_index};
      done.insert_or_assign(std::move(key), std::move(p));
    } catch (const Error& e) {
      spdlog::warn("journal {}:{} skipped: {}", path, line_no, e.what());
    }
  }
  return done;
}

}  // namespace

void PipelineConfig::Validate() const {
  auto require_file = [](const std::string& path, const char* what) {
    if (path.empty()) throw Error(ErrorCode::kConfig, std::string(what) + " not set");
    if (!fs::is_regular_file(path)) {
      throw Error(ErrorCode::kConfig,
                  std::string(what) + " does not exist: " + path);
    }
  };
  require_file(dataset_path, "dataset");
  require_file(taxonomy_path, "taxonomy");
  if (!instruction_path.empty()) require_file(instruction_path, "instruction file");
  if (k < 1) throw Error(ErrorCode::kConfig, "k must be >= 1");
  if (concurrency < 1) throw Error(ErrorCode::kConfig, "concurrency must be >= 1");
  if (max_new_tokens < 1) {
    throw Error(ErrorCode::kConfig, "max_new_tokens must be >= 1");
  }
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "failure threshold must lie in [0, 1]");
  }
  if ((gen_test == GenerationTest::kNone) == gen_url.empty()) {
    throw Error(ErrorCode::kConfig,
                "select exactly one of a generation URL or a test generator");
  }
  if (embed_test == !embed_url.empty()) {
    throw Error(ErrorCode::kConfig,
                "select exactly one of an embedding URL or the test embedder");
  }
  for (double r : {corruption.deletion, corruption.substitution}) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw Error(ErrorCode::kConfig, "corruption rates must lie in [0, 1]");
    }
  }
  if (embed_test && embed_dim < 8) {
    throw Error(ErrorCode::kConfig, "test embedder dim must be >= 8");
  }
  if (resume && journal_path.empty()) {
    throw Error(ErrorCode::kConfig, "resume requires a journal path");
  }
}

PipelineConfig LoadPipelineConfig(const std::string& path) {
  json doc;
  try {
    doc = json::parse(ReadFile(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).string();
  };
  PipelineConfig c;
  try {
    c.dataset_path = resolve(doc.at("dataset").get<std::string>());
    c.taxonomy_path = resolve(doc.at("taxonomy").get<std::string>());
    c.instruction_path = resolve(doc.value("instruction_file", std::string()));
    const std::string mode = doc.value("mode", std::string("instruct"));
    if (mode != "instruct" && mode != "plain") {
      throw Error(ErrorCode::kConfig, "mode must be instruct or plain");
    }
    c.mode.with_instruction = mode == "instruct";
    const std::string target = doc.value("target", std::string("doc"));
    if (target != "doc" && target != "tagwords") {
      throw Error(ErrorCode::kConfig, "target must be doc or tagwords");
    }
    c.mode.target =
        target == "doc" ? TargetKind::kDocumentation : TargetKind::kTagWords;
    c.gen_url = doc.value("gen_url", std::string());
    const std::string gen_test = doc.value("gen_test", std::string());
    if (gen_test == "oracle") {
      c.gen_test = GenerationTest::kOracle;
    } else if (gen_test == "corrupt") {
      c.gen_test = GenerationTest::kCorrupt;
    } else if (!gen_test.empty()) {
      throw Error(ErrorCode::kConfig, "gen_test must be oracle or corrupt");
    }
    c.corruption.deletion = doc.value("corrupt_rate", 0.0);
    c.corruption.substitution = doc.value("substitute_rate", 0.0);
    c.seed = doc.value("seed", std::uint64_t{0});
    c.embed_url = doc.value("embed_url", std::string());
    c.embed_test = doc.value("embed_test", false);
    c.embed_dim = doc.value("dim", std::size_t{4096});
    c.k = doc.value("k", std::size_t{5});
    c.concurrency = doc.value("concurrency", std::size_t{8});
    c.index_cache = resolve(doc.value("index_cache", std::string()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
  return c;
}

std::string ResolveInstruction(const PipelineConfig& config) {
  return config.instruction_path.empty()
             ? std::string(DefaultInstruction())
             : LoadInstruction(config.instruction_path);
}

Backends MakeBackends(const PipelineConfig& config, const Corpus& corpus,
                      std::string_view instruction) {
  Backends b;
  switch (config.gen_test) {
    case GenerationTest::kNone:
      b.generation =
          std::make_shared<HttpGenerationClient>(config.gen_url, config.http);
      break;
    case GenerationTest::kOracle:
      b.generation = OracleGenerator::ForCorpus(corpus, config.mode, instruction);
      break;
    case GenerationTest::kCorrupt:
      b.generation = std::make_shared<CorruptingGenerator>(
          OracleGenerator::ForCorpus(corpus, config.mode, instruction),
          config.corruption, config.seed);
      break;
  }
  if (config.embed_test) {
    b.embedding = MakeTestEmbedder(config.embed_dim, config.seed);
  } else {
    b.embedding =
        std::make_shared<HttpEmbeddingClient>(config.embed_url, config.http);
  }
  return b;
}

TagIndex LoadOrBuildIndex(const PipelineConfig& config,
                          const Taxonomy& taxonomy, EmbeddingBackend& backend) {
  if (!config.index_cache.empty() && fs::is_regular_file(config.index_cache)) {
    try {
      TagIndex cached = TagIndex::ReadCache(config.index_cache);
      if (cached.Covers(taxonomy) && cached.source() == config.mode.target) {
        spdlog::info("loaded index cache {}", config.index_cache);
        return cached;
      }
      spdlog::warn("index cache {} does not match the taxonomy; rebuilding",
                   config.index_cache);
    } catch (const Error& e) {
      spdlog::warn("index cache {} unreadable ({}); rebuilding",
                   config.index_cache, e.what());
    }
  }
  TagIndex index = TagIndex::Build(taxonomy, backend, config.mode.target);
  if (!config.index_cache.empty()) index.WriteCache(config.index_cache);
  return index;
}

PipelineResult RunPipeline(const Corpus& corpus, std::string_view instruction,
                           const TagIndex& index,
                           GenerationBackend& generator,
                           EmbeddingBackend& embedder,
                           const PipelineOptions& options) {
  if (options.k < 1) throw Error(ErrorCode::kConfig, "k must be >= 1");
  PipelineResult result;
  std::vector<WorkItem> items;
  std::size_t total_mentions = 0;
  for (const auto& st : corpus.statements()) {
    if (st.split != Split::kTest) continue;
    total_mentions += st.mentions.size();
    for (auto& g : RenderStatement(st, options.mode, instruction,
                                   corpus.taxonomy())) {
      result.shared_inputs += g.mention_indices.size() - 1;
      result.prompts.push_back(g.prompt);
      items.push_back({std::move(g), &st});
    }
  }
  if (result.shared_inputs > 0) {
    spdlog::warn(
        "{} test mentions share a rendered input with another mention of "
        "the same sentence; their predictions are broadcast",
        result.shared_inputs);
  }

  std::map<MentionKey, LabeledPrediction> journaled;
  if (options.resume) journaled = ReadJournal(options.journal_path);
  std::ofstream journal;
  if (!options.journal_path.empty()) {
    journal.open(options.journal_path,
                 options.resume ? std::ios::app : std::ios::trunc);
    if (!journal) {
      throw Error(ErrorCode::kIo, "cannot open journal " + options.journal_path);
    }
  }
  std::mutex journal_mu;

  auto process = [&](const WorkItem& item) {
    Outcome out;
    const auto& group = item.group;
    const Statement& st = *item.statement;
    bool all_done = options.resume;
    for (std::size_t m : group.mention_indices) {
      all_done = all_done && journaled.contains({st.sid, m});
    }
    if (all_done) {
      for (std::size_t m : group.mention_indices) {
        out.predictions.push_back(journaled.at({st.sid, m}));
      }
      return out;
    }
    try {
      const GeneratedOutput generated = Generate(
          generator, {group.prompt.input_text, options.max_new_tokens});
      const Prediction pred = Match(index, generated, embedder, options.k);
      for (std::size_t m : group.mention_indices) {
        out.predictions.push_back(
            {st.sid, m, st.mentions[m].gold_tag, pred});
      }
    } catch (const Error& e) {
      spdlog::warn("{}#{}: {}", st.sid, group.prompt.mention_index, e.what());
      for (std::size_t m : group.mention_indices) {
        out.failures.push_back({st.sid, m, e.what()});
      }
      return out;
    }
    if (journal.is_open()) {
      std::string lines;
      for (const auto& p : out.predictions) lines += PredictionToJson(p) + "\n";
      std::lock_guard lock(journal_mu);
      journal << lines << std::flush;
    }
    return out;
  };

  std::vector<Outcome> outcomes(items.size());
  std::atomic<std::size_t> next{0};
  {
    const std::size_t workers =
        std::max<std::size_t>(1, std::min(options.concurrency, items.size()));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
          outcomes[i] = process(items[i]);
        }
      });
    }
  }

  for (auto& o : outcomes) {
    for (auto& p : o.predictions) result.predictions.push_back(std::move(p));
    for (auto& f : o.failures) result.failures.push_back(std::move(f));
  }
  const auto by_key = [](const auto& a, const auto& b) {
    return std::tie(a.sid, a.mention_index) < std::tie(b.sid, b.mention_index);
  };
  std::sort(result.predictions.begin(), result.predictions.end(), by_key);
  std::sort(result.failures.begin(), result.failures.end(), by_key);

  const double failed_fraction =
      total_mentions == 0 ? 0.0
                          : static_cast<double>(result.failures.size()) /
                                static_cast<double>(total_mentions);
  spdlog::info("{} test mentions: {} predicted, {} failed",
               total_mentions, result.predictions.size(),
               result.failures.size());
  if (failed_fraction > options.max_failure_fraction) {
    throw Error(ErrorCode::kFailureThreshold,
                std::to_string(result.failures.size()) + " of " +
                    std::to_string(total_mentions) + " mentions failed");
  }
  if (result.predictions.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no test mentions to evaluate");
  }
  result.report = Evaluate(result.predictions, corpus, options.eval);
  result.report.n_failed = result.failures.size();
  return result;
}

PipelineResult RunPipeline(const PipelineConfig& config) {
  config.Validate();
  const Corpus corpus = Corpus::Load(config.dataset_path, config.taxonomy_path);
  const std::string instruction = ResolveInstruction(config);
  Backends backends = MakeBackends(config, corpus, instruction);
  const TagIndex index =
      LoadOrBuildIndex(config, corpus.taxonomy(), *backends.embedding);

  PipelineOptions options;
  options.mode = config.mode;
  options.k = config.k;
  options.max_new_tokens = config.max_new_tokens;
  options.concurrency = config.concurrency;
  options.max_failure_fraction = config.max_failure_fraction;
  options.eval = config.eval;
  options.eval.max_k = config.k;
  options.journal_path = config.journal_path;
  options.resume = config.resume;
  PipelineResult result = RunPipeline(corpus, instruction, index,
                                      *backends.generation,
                                      *backends.embedding, options);

  if (!config.report_out.empty()) {
    WriteFile(config.report_out, ReportToJson(result.report));
  }
  if (!config.prompts_out.empty()) {
    std::string lines;
    for (const auto& p : result.prompts) lines += PromptInstanceToJson(p) + "\n";
    WriteFile(config.prompts_out, lines);
  }
  if (!config.predictions_out.empty()) {
    std::string lines;
    for (const auto& p : result.predictions) lines += PredictionToJson(p) + "\n";
    WriteFile(config.predictions_out, lines);
  }
  return result;
}

std::string PredictionToJson(const LabeledPrediction& pred) {
  json ranked = json::array();
  for (const auto& r : pred.prediction.ranked) {
    ranked.push_back(json::array({r.tag_id, r.score}));
  }
  return json{{"sid", pred.sid},
              {"mention", pred.mention_index},
              {"gold", pred.gold},
              {"query", pred.prediction.query_text},
              {"ranked", std::move(ranked)}}
      .dump();
}

LabeledPrediction PredictionFromJson(std::string_view line) {
  try {
    const json doc = json::parse(line);
    LabeledPrediction p;
    p.sid = doc.at("sid").get<std::string>();
    p.mention_index = doc.at("mention").get<std::size_t>();
    p.gold = doc.at("gold").get<std::string>();
    p.prediction.query_text = doc.at("query").get<std::string>();
    for (const auto& r : doc.at("ranked")) {
      p.prediction.ranked.push_back(
          {r.at(0).get<std::string>(), r.at(1).get<double>()});
    }
    if (p.prediction.ranked.empty()) {
      throw Error(ErrorCode::kMalformedRecord, "prediction without ranking");
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, e.what());
  }
}

std::vector<LabeledPrediction> ReadPredictions(const std::string& path) {
  std::vector<LabeledPrediction> out;
  std::istringstream in(ReadFile(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!Trim(line).empty()) out.push_back(PredictionFromJson(line));
  }
  return out;
}

void WriteFile(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace xfnl
