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

#include "xfnl/backends.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "spdlog/spdlog.h"
#include "xfnl/error.h"
#include "xfnl/text.h"

namespace xfnl {
namespace {

using nlohmann::json;

// Draws `count` distinct positions out of [0, n) with a partial
// Fisher-Yates shuffle.
std::vector<std::size_t> DrawPositions(std::mt19937_64& rng, std::size_t n,
                                       std::size_t count) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + UniformBelow(rng, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::size_t RoundedCount(double rate, std::size_t n) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "corruption rate must lie in [0, 1]");
  }
  return std::min(n, static_cast<std::size_t>(std::llround(rate * n)));
}

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<>& s) : s_(s) {
    s_.acquire();
  }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

// Splits "http://host:port/prefix" into "http://host:port" and "/prefix".
std::pair<std::string, std::string> SplitUrl(const std::string& url) {
  const auto scheme = url.find("://");
  const auto start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', start);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

// Transport failures are retried with exponential backoff; any response
// other than 200 is a backend error and is not retried.
std::string PostWithRetry(const std::string& base_url, const std::string& path,
                          const std::string& body,
                          const HttpClientOptions& options) {
  const auto [host, prefix] = SplitUrl(base_url);
  const auto started = std::chrono::steady_clock::now();
  const int attempts = std::max(1, options.retry.attempts);
  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    httplib::Client client(host);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);
    auto res = client.Post(prefix + path, body, "application/json");
    if (res) {
      if (res->status != 200) {
        throw Error(ErrorCode::kBackendStatus,
                    base_url + path + " returned HTTP " +
                        std::to_string(res->status));
      }
      return res->body;
    }
    last_error = httplib::to_string(res.error());
    if (attempt + 1 == attempts) break;
    const auto backoff = options.retry.base_backoff * (1LL << attempt);
    if (std::chrono::steady_clock::now() - started + backoff >
        options.retry.deadline) {
      break;
    }
    spdlog::warn("{}{}: {} (attempt {}/{}), retrying in {} ms", base_url,
                 path, last_error, attempt + 1, attempts, backoff.count());
    std::this_thread::sleep_for(backoff);
  }
  throw Error(ErrorCode::kTransport, base_url + path + ": " + last_error);
}

json ParseResponse(const std::string& body, const std::string& what) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kBackendStatus,
                "malformed " + what + " response: " + e.what());
  }
}

}  // namespace

GeneratedOutput Generate(GenerationBackend& backend,
                         const GenerationRequest& request) {
  if (request.max_new_tokens < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_new_tokens must be >= 1");
  }
  const auto start = std::chrono::steady_clock::now();
  std::string raw = backend.Complete(request);
  const std::chrono::duration<double, std::milli> elapsed =
      std::chrono::steady_clock::now() - start;
  std::string text(Trim(raw));
  if (text.empty()) {
    throw Error(ErrorCode::kEmptyResponse, "generator returned no text");
  }
  return {std::move(text), elapsed.count()};
}

std::vector<EmbeddingVector> Embed(EmbeddingBackend& backend,
                                   std::span<const std::string> texts) {
  if (texts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no texts to embed");
  }
  for (const auto& t : texts) {
    if (Trim(t).empty()) {
      throw Error(ErrorCode::kInvalidArgument, "cannot embed empty text");
    }
  }
  auto vectors = backend.EmbedTexts(texts);
  if (vectors.size() != texts.size()) {
    throw Error(ErrorCode::kBackendStatus,
                "embedder returned " + std::to_string(vectors.size()) +
                    " vectors for " + std::to_string(texts.size()) + " texts");
  }
  const std::size_t dim = vectors.front().dim();
  for (const auto& v : vectors) {
    if (v.dim() != dim || dim == 0) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "expected dim " + std::to_string(dim) + ", got " +
                      std::to_string(v.dim()));
    }
    for (double x : v.values) {
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::kBackendStatus, "non-finite embedding value");
      }
    }
  }
  return vectors;
}

std::unique_ptr<OracleGenerator> OracleGenerator::ForCorpus(
    const Corpus& corpus, const PromptMode& mode,
    std::string_view instruction) {
  std::map<std::string, std::string> answers;
  for (const auto& st : corpus.statements()) {
    for (const auto& group :
         RenderStatement(st, mode, instruction, corpus.taxonomy())) {
      answers.emplace(group.prompt.input_text, group.prompt.expected_target);
    }
  }
  return std::make_unique<OracleGenerator>(std::move(answers));
}

std::string OracleGenerator::Complete(const GenerationRequest& request) {
  auto it = answers_.find(request.input_text);
  if (it == answers_.end()) {
    throw Error(ErrorCode::kBackendStatus, "oracle has no answer for prompt");
  }
  return it->second;
}

const std::vector<std::string>& DistractorWords() {
  static const std::vector<std::string> kWords = {
      "accrued",  "aggregate", "annual",     "current", "deferred",
      "gross",    "increase",  "noncurrent", "net",     "total",
  };
  return kWords;
}

std::vector<std::string> CorruptWords(std::vector<std::string> words,
                                      const CorruptionRates& rates,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto deleted =
      DrawPositions(rng, words.size(), RoundedCount(rates.deletion, words.size()));
  std::vector<std::string> kept;
  kept.reserve(words.size() - deleted.size());
  for (std::size_t i = 0, d = 0; i < words.size(); ++i) {
    if (d < deleted.size() && deleted[d] == i) {
      ++d;
      continue;
    }
    kept.push_back(std::move(words[i]));
  }
  const auto& distractors = DistractorWords();
  for (std::size_t i : DrawPositions(
           rng, kept.size(), RoundedCount(rates.substitution, kept.size()))) {
    kept[i] = distractors[UniformBelow(rng, distractors.size())];
  }
  return kept;
}

CorruptingGenerator::CorruptingGenerator(
    std::shared_ptr<GenerationBackend> inner, CorruptionRates rates,
    std::uint64_t seed)
    : inner_(std::move(inner)), rates_(rates), seed_(seed) {
  RoundedCount(rates_.deletion, 0);
  RoundedCount(rates_.substitution, 0);
}

std::string CorruptingGenerator::Complete(const GenerationRequest& request) {
  const std::string clean = inner_->Complete(request);
  const std::uint64_t seed = Mix64(seed_ ^ Fnv1a64(request.input_text));
  return JoinWords(CorruptWords(SplitWhitespace(clean), rates_, seed));
}

TestEmbedder::TestEmbedder(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim < 8) {
    throw Error(ErrorCode::kInvalidArgument, "test embedder needs dim >= 8");
  }
}

std::size_t TestEmbedder::BucketOf(std::string_view word) const {
  return static_cast<std::size_t>(Mix64(seed_ ^ Fnv1a64(word)) % dim_);
}

std::vector<EmbeddingVector> TestEmbedder::EmbedTexts(
    std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    EmbeddingVector v{std::vector<double>(dim_, 0.0)};
    for (const auto& w : TokenizeWords(text)) v.values[BucketOf(w)] += 1.0;
    double norm = 0.0;
    for (double x : v.values) norm += x * x;
    if (norm == 0.0) {
      throw Error(ErrorCode::kZeroNorm, "text has no words: '" + text + "'");
    }
    norm = std::sqrt(norm);
    for (double& x : v.values) x /= norm;
    out.push_back(std::move(v));
  }
  return out;
}

std::unique_ptr<TestEmbedder> MakeTestEmbedder(std::size_t dim,
                                               std::uint64_t seed) {
  return std::make_unique<TestEmbedder>(dim, seed);
}

HttpGenerationClient::HttpGenerationClient(std::string base_url,
                                           HttpClientOptions options)
    : base_url_(std::move(base_url)),
      options_(options),
      in_flight_(std::max<std::ptrdiff_t>(1, options.max_in_flight)) {}

std::string HttpGenerationClient::Complete(const GenerationRequest& request) {
  const std::string body =
      json{{"input", request.input_text},
           {"max_new_tokens", request.max_new_tokens}}
          .dump();
  std::string response;
  {
    SemaphoreGuard guard(in_flight_);
    response = PostWithRetry(base_url_, "/v1/generate", body, options_);
  }
  const json doc = ParseResponse(response, "generate");
  auto it = doc.find("text");
  if (it == doc.end() || !it->is_string()) {
    throw Error(ErrorCode::kBackendStatus, "generate response lacks 'text'");
  }
  return it->get<std::string>();
}

HttpEmbeddingClient::HttpEmbeddingClient(std::string base_url,
                                         HttpClientOptions options)
    : base_url_(std::move(base_url)),
      options_(options),
      in_flight_(std::max<std::ptrdiff_t>(1, options.max_in_flight)) {}

std::vector<EmbeddingVector> HttpEmbeddingClient::EmbedTexts(
    std::span<const std::string> texts) {
  const std::size_t batch = std::max<std::size_t>(1, options_.embed_batch_size);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  std::size_t session_dim = 0;
  for (std::size_t begin = 0; begin < texts.size(); begin += batch) {
    const auto chunk =
        texts.subspan(begin, std::min(batch, texts.size() - begin));
    const std::string body =
        json{{"texts", std::vector<std::string>(chunk.begin(), chunk.end())}}
            .dump();
    std::string response;
    {
      SemaphoreGuard guard(in_flight_);
      response = PostWithRetry(base_url_, "/v1/embed", body, options_);
    }
    const json doc = ParseResponse(response, "embed");
    if (!doc.contains("vectors") || !doc["vectors"].is_array() ||
        !doc.contains("dim") || !doc["dim"].is_number_integer()) {
      throw Error(ErrorCode::kBackendStatus,
                  "embed response lacks 'vectors' or 'dim'");
    }
    const auto dim = doc["dim"].get<std::size_t>();
    if (session_dim == 0) session_dim = dim;
    if (dim != session_dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "batch dim " + std::to_string(dim) + " differs from " +
                      std::to_string(session_dim));
    }
    if (doc["vectors"].size() != chunk.size()) {
      throw Error(ErrorCode::kBackendStatus, "embed response size mismatch");
    }
    for (const auto& row : doc["vectors"]) {
      EmbeddingVector v;
      try {
        v.values = row.get<std::vector<double>>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kBackendStatus,
                    std::string("bad embedding row: ") + e.what());
      }
      if (v.dim() != dim) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "row of length " + std::to_string(v.dim()) +
                        " in batch declaring dim " + std::to_string(dim));
      }
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace xfnl
