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

#ifndef XFNL_BACKENDS_H_
#define XFNL_BACKENDS_H_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "xfnl/corpus.h"
#include "xfnl/prompting.h"

namespace xfnl {

inline constexpr int kDefaultMaxNewTokens = 30;

struct GenerationRequest {
  std::string input_text;
  int max_new_tokens = kDefaultMaxNewTokens;
};

struct GeneratedOutput {
  std::string text;  // trimmed, nonempty
  double latency_ms = 0.0;
};

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

// A text generator. Implementations return the raw completion; the free
// function Generate() validates and trims it.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string Complete(const GenerationRequest& request) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<EmbeddingVector> EmbedTexts(
      std::span<const std::string> texts) = 0;
};

// Throws kEmptyResponse when the completion is blank after trimming.
GeneratedOutput Generate(GenerationBackend& backend,
                         const GenerationRequest& request);

// One vector per text with a uniform, finite dimension.
std::vector<EmbeddingVector> Embed(EmbeddingBackend& backend,
                                   std::span<const std::string> texts);

// Answers every rendered prompt of a corpus with its expected target.
class OracleGenerator : public GenerationBackend {
 public:
  explicit OracleGenerator(std::map<std::string, std::string> answers)
      : answers_(std::move(answers)) {}

  // Prompts of every split; the first mention wins when two mentions share
  // an input.
  static std::unique_ptr<OracleGenerator> ForCorpus(
      const Corpus& corpus, const PromptMode& mode,
      std::string_view instruction);

  std::string Complete(const GenerationRequest& request) override;

 private:
  std::map<std::string, std::string> answers_;
};

struct CorruptionRates {
  double deletion = 0.0;
  double substitution = 0.0;
};

// Fixed replacement vocabulary of the substitution corruption.
const std::vector<std::string>& DistractorWords();

// Deletes round(deletion * n) words, then substitutes round(substitution *
// m) of the m survivors with distractor words. Positions are drawn from an
// mt19937_64 seeded with `seed`.
std::vector<std::string> CorruptWords(std::vector<std::string> words,
                                      const CorruptionRates& rates,
                                      std::uint64_t seed);

// Wraps another generator and corrupts its output. The per-request seed is
// derived from the session seed and the request input, so results do not
// depend on call order.
class CorruptingGenerator : public GenerationBackend {
 public:
  CorruptingGenerator(std::shared_ptr<GenerationBackend> inner,
                      CorruptionRates rates, std::uint64_t seed);

  std::string Complete(const GenerationRequest& request) override;

 private:
  std::shared_ptr<GenerationBackend> inner_;
  CorruptionRates rates_;
  std::uint64_t seed_;
};

// Bag-of-words embedder: every word maps to a seeded hash bucket, the text
// vector is the L2-normalized bucket histogram.
class TestEmbedder : public EmbeddingBackend {
 public:
  TestEmbedder(std::size_t dim, std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  std::size_t BucketOf(std::string_view word) const;
  std::vector<EmbeddingVector> EmbedTexts(
      std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

std::unique_ptr<TestEmbedder> MakeTestEmbedder(std::size_t dim,
                                               std::uint64_t seed);

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_backoff{100};
  std::chrono::milliseconds deadline{60000};
};

struct HttpClientOptions {
  RetryPolicy retry;
  std::ptrdiff_t max_in_flight = 8;
  std::size_t embed_batch_size = 32;
  std::chrono::seconds timeout{60};
};

// POST <base>/v1/generate {"input", "max_new_tokens"} -> {"text"}.
class HttpGenerationClient : public GenerationBackend {
 public:
  HttpGenerationClient(std::string base_url, HttpClientOptions options = {});

  std::string Complete(const GenerationRequest& request) override;

 private:
  std::string base_url_;
  HttpClientOptions options_;
  std::counting_semaphore<> in_flight_;
};

// POST <base>/v1/embed {"texts"} -> {"vectors", "dim"}, in batches.
class HttpEmbeddingClient : public EmbeddingBackend {
 public:
  HttpEmbeddingClient(std::string base_url, HttpClientOptions options = {});

  std::vector<EmbeddingVector> EmbedTexts(
      std::span<const std::string> texts) override;

 private:
  std::string base_url_;
  HttpClientOptions options_;
  std::counting_semaphore<> in_flight_;
};

}  // namespace xfnl

#endif  // XFNL_BACKENDS_H_
