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

#ifndef XFNL_PIPELINE_H_
#define XFNL_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xfnl/backends.h"
#include "xfnl/corpus.h"
#include "xfnl/matcher.h"
#include "xfnl/metrics.h"
#include "xfnl/prompting.h"

namespace xfnl {

enum class GenerationTest { kNone, kOracle, kCorrupt };

struct PipelineConfig {
  std::string dataset_path;
  std::string taxonomy_path;
  std::string instruction_path;  // empty: bundled preamble
  PromptMode mode;

  std::string gen_url;
  GenerationTest gen_test = GenerationTest::kNone;
  CorruptionRates corruption;
  std::uint64_t seed = 0;

  std::string embed_url;
  bool embed_test = false;
  std::size_t embed_dim = 4096;

  std::size_t k = 5;
  int max_new_tokens = kDefaultMaxNewTokens;
  std::size_t concurrency = 8;
  double max_failure_fraction = 0.05;
  EvalOptions eval;
  HttpClientOptions http;

  std::string report_out;
  std::string index_cache;
  std::string prompts_out;
  std::string predictions_out;
  std::string journal_path;
  bool resume = false;

  // Throws kConfig. Input paths must exist, k >= 1, exactly one backend of
  // each kind must be selected.
  void Validate() const;
};

// Reads the JSON config consumed by `xfnl serve`; relative paths resolve
// against the config file's directory.
PipelineConfig LoadPipelineConfig(const std::string& path);

std::string ResolveInstruction(const PipelineConfig& config);

struct Backends {
  std::shared_ptr<GenerationBackend> generation;
  std::shared_ptr<EmbeddingBackend> embedding;
};

Backends MakeBackends(const PipelineConfig& config, const Corpus& corpus,
                      std::string_view instruction);

// Reads the index cache when it matches the taxonomy and source, otherwise
// builds the index and (when a cache path is set) writes it.
TagIndex LoadOrBuildIndex(const PipelineConfig& config,
                          const Taxonomy& taxonomy, EmbeddingBackend& backend);

struct PipelineOptions {
  PromptMode mode;
  std::size_t k = 5;
  int max_new_tokens = kDefaultMaxNewTokens;
  std::size_t concurrency = 8;
  double max_failure_fraction = 0.05;
  EvalOptions eval;
  std::string journal_path;
  bool resume = false;
};

struct MentionFailure {
  std::string sid;
  std::size_t mention_index = 0;
  std::string message;
};

struct PipelineResult {
  EvalReport report;
  std::vector<LabeledPrediction> predictions;  // canonical order
  std::vector<MentionFailure> failures;        // canonical order
  std::vector<PromptInstance> prompts;         // one per rendered input
  std::size_t shared_inputs = 0;  // mentions sharing another's input
};

// Renders, generates and matches every test-split mention on a bounded
// worker pool, then evaluates. Per-mention backend failures are excluded
// and counted; the run throws kFailureThreshold when their fraction exceeds
// the configured maximum.
PipelineResult RunPipeline(const Corpus& corpus, std::string_view instruction,
                           const TagIndex& index,
                           GenerationBackend& generator,
                           EmbeddingBackend& embedder,
                           const PipelineOptions& options);

// Loads inputs, builds backends and index, runs, writes the configured
// artifacts.
PipelineResult RunPipeline(const PipelineConfig& config);

std::string PredictionToJson(const LabeledPrediction& pred);
LabeledPrediction PredictionFromJson(std::string_view line);
std::vector<LabeledPrediction> ReadPredictions(const std::string& path);

void WriteFile(const std::string& path, std::string_view bytes);

}  // namespace xfnl

#endif  // XFNL_PIPELINE_H_
