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

#ifndef XFNL_SERVICE_H_
#define XFNL_SERVICE_H_

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "xfnl/backends.h"
#include "xfnl/corpus.h"
#include "xfnl/matcher.h"
#include "xfnl/pipeline.h"
#include "xfnl/prompting.h"
#include "xfnl/review.h"

namespace httplib {
class Server;
}  // namespace httplib

namespace xfnl {

// HTTP surface:
//   POST /tag {"text", "numeral"} -> {"candidates": [{tag, documentation,
//        score}]}
//   GET  /tasks/next?annotator=ID -> client task view, or 204
//   POST /annotations {task_id, annotator, chosen}
//   GET  /reports/agreement
// Handlers are plain methods so they can be exercised without a socket.
class TaggingService {
 public:
  struct Response {
    int status = 200;
    std::string body;
  };

  // `store` may be null, in which case the review endpoints answer 404.
  TaggingService(const Taxonomy& taxonomy, const TagIndex& index,
                 GenerationBackend& generator, EmbeddingBackend& embedder,
                 PromptMode mode, std::string instruction, std::size_t k,
                 ReviewStore* store);

  Response Tag(std::string_view body) const;
  Response NextTask(const std::string& annotator) const;
  Response Annotate(std::string_view body);
  Response Agreement() const;

  void Mount(httplib::Server& server);

 private:
  const Taxonomy& taxonomy_;
  const TagIndex& index_;
  GenerationBackend& generator_;
  EmbeddingBackend& embedder_;
  PromptMode mode_;
  std::string instruction_;
  std::size_t k_;
  ReviewStore* store_;
};

struct ServeConfig {
  PipelineConfig pipeline;
  std::string tasks_path;        // optional review task file
  std::string annotations_path;  // append-only annotation log
  std::string host = "127.0.0.1";
};

// Pipeline keys as in LoadPipelineConfig plus "tasks", "annotations" and
// "host".
ServeConfig LoadServeConfig(const std::string& path);

// Everything a running service owns. Construction loads the corpus and
// builds the index, so an unreachable embedding backend fails here.
class ServiceRuntime {
 public:
  explicit ServiceRuntime(const ServeConfig& config);
  ~ServiceRuntime();

  TaggingService& service() { return *service_; }

 private:
  std::unique_ptr<Corpus> corpus_;
  Backends backends_;
  std::unique_ptr<TagIndex> index_;
  std::unique_ptr<ReviewStore> store_;
  std::unique_ptr<TaggingService> service_;
};

}  // namespace xfnl

#endif  // XFNL_SERVICE_H_
