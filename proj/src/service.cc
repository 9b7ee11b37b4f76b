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

#include "xfnl/service.h"

#include <filesystem>

#include "httplib.h"
#include "json.hpp"
#include "spdlog/spdlog.h"
#include "xfnl/error.h"
#include "xfnl/text.h"

namespace xfnl {
namespace {

using nlohmann::json;

TaggingService::Response JsonResponse(int status, const json& doc) {
  return {status, doc.dump()};
}

TaggingService::Response ErrorResponse(int status, std::string_view message) {
  return JsonResponse(status, {{"error", message}});
}

int StatusFor(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kTransport:
    case ErrorCode::kBackendStatus:
    case ErrorCode::kEmptyResponse:
    case ErrorCode::kDimensionMismatch:
      return 502;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kZeroNorm:
      return 422;
    default:
      return 500;
  }
}

void Reply(httplib::Response& res, const TaggingService::Response& r) {
  res.status = r.status;
  if (!r.body.empty()) res.set_content(r.body, "application/json");
}

}  // namespace

TaggingService::TaggingService(const Taxonomy& taxonomy, const TagIndex& index,
                               GenerationBackend& generator,
                               EmbeddingBackend& embedder, PromptMode mode,
                               std::string instruction, std::size_t k,
                               ReviewStore* store)
    : taxonomy_(taxonomy),
      index_(index),
      generator_(generator),
      embedder_(embedder),
      mode_(mode),
      instruction_(std::move(instruction)),
      k_(k),
      store_(store) {}

TaggingService::Response TaggingService::Tag(std::string_view body) const {
  std::string text;
  std::string numeral;
  try {
    const json doc = json::parse(body);
    text = doc.at("text").get<std::string>();
    numeral = doc.at("numeral").get<std::string>();
  } catch (const json::exception& e) {
    return ErrorResponse(400, e.what());
  }
  if (Trim(text).empty() || Trim(numeral).empty()) {
    return ErrorResponse(400, "text and numeral must be nonempty");
  }
  if (text.find(numeral) == std::string::npos) {
    return ErrorResponse(422, "numeral does not occur in text");
  }
  try {
    const auto generated =
        Generate(generator_, {RenderInput(text, numeral, mode_, instruction_)});
    const Prediction pred = Match(index_, generated, embedder_, k_);
    json candidates = json::array();
    for (const auto& r : pred.ranked) {
      candidates.push_back(
          {{"tag", r.tag_id},
           {"documentation", taxonomy_.Get(r.tag_id).documentation},
           {"score", r.score}});
    }
    return JsonResponse(200, {{"candidates", std::move(candidates)},
                              {"generated", generated.text}});
  } catch (const Error& e) {
    spdlog::warn("/tag: {}", e.what());
    return ErrorResponse(StatusFor(e), e.what());
  }
}

TaggingService::Response TaggingService::NextTask(
    const std::string& annotator) const {
  if (store_ == nullptr) return ErrorResponse(404, "no review tasks loaded");
  if (annotator.empty()) return ErrorResponse(400, "annotator is required");
  auto task = store_->NextTask(annotator);
  if (!task) return {204, ""};
  return JsonResponse(200, TaskToClientJson(*task));
}

TaggingService::Response TaggingService::Annotate(std::string_view body) {
  if (store_ == nullptr) return ErrorResponse(404, "no review tasks loaded");
  AnnotationRecord record;
  try {
    const json doc = json::parse(body);
    record.task_id = doc.at("task_id").get<std::string>();
    record.annotator = doc.at("annotator").get<std::string>();
    record.chosen = doc.at("chosen").get<std::string>();
  } catch (const json::exception& e) {
    return ErrorResponse(400, e.what());
  }
  if (record.annotator.empty()) {
    return ErrorResponse(400, "annotator is required");
  }
  record.timestamp = UtcTimestamp();
  switch (store_->Submit(record)) {
    case ReviewStore::SubmitStatus::kOk:
      return JsonResponse(200, AnnotationToJson(record));
    case ReviewStore::SubmitStatus::kUnknownTask:
      return ErrorResponse(404, "unknown task " + record.task_id);
    case ReviewStore::SubmitStatus::kNotACandidate:
      return ErrorResponse(422, "chosen tag is not a candidate of the task");
    case ReviewStore::SubmitStatus::kDuplicate:
      return ErrorResponse(409, "task already annotated by " +
                                    record.annotator);
  }
  return ErrorResponse(500, "unreachable");
}

TaggingService::Response TaggingService::Agreement() const {
  if (store_ == nullptr) return ErrorResponse(404, "no review tasks loaded");
  try {
    return JsonResponse(200, AgreementToJson(store_->Report()));
  } catch (const Error&) {
    // Nothing doubly annotated yet.
    return JsonResponse(200, AgreementToJson(AgreementReport{}));
  }
}

void TaggingService::Mount(httplib::Server& server) {
  server.Post("/tag", [this](const httplib::Request& req,
                             httplib::Response& res) { Reply(res, Tag(req.body)); });
  server.Get("/tasks/next",
             [this](const httplib::Request& req, httplib::Response& res) {
               Reply(res, NextTask(req.get_param_value("annotator")));
             });
  server.Post("/annotations",
              [this](const httplib::Request& req, httplib::Response& res) {
                Reply(res, Annotate(req.body));
              });
  server.Get("/reports/agreement",
             [this](const httplib::Request&, httplib::Response& res) {
               Reply(res, Agreement());
             });
}

ServeConfig LoadServeConfig(const std::string& path) {
  ServeConfig c;
  c.pipeline = LoadPipelineConfig(path);
  const json doc = json::parse(ReadFile(path));
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (base / p).string();
  };
  c.tasks_path = resolve(doc.value("tasks", std::string()));
  c.annotations_path = resolve(doc.value("annotations", std::string()));
  c.host = doc.value("host", c.host);
  return c;
}

ServiceRuntime::ServiceRuntime(const ServeConfig& config) {
  config.pipeline.Validate();
  corpus_ = std::make_unique<Corpus>(Corpus::Load(
      config.pipeline.dataset_path, config.pipeline.taxonomy_path));
  const std::string instruction = ResolveInstruction(config.pipeline);
  backends_ = MakeBackends(config.pipeline, *corpus_, instruction);
  index_ = std::make_unique<TagIndex>(LoadOrBuildIndex(
      config.pipeline, corpus_->taxonomy(), *backends_.embedding));
  if (!config.tasks_path.empty()) {
    store_ = ReviewStore::Load(config.tasks_path, config.annotations_path);
  }
  service_ = std::make_unique<TaggingService>(
      corpus_->taxonomy(), *index_, *backends_.generation,
      *backends_.embedding, config.pipeline.mode, instruction,
      config.pipeline.k, store_.get());
}

ServiceRuntime::~ServiceRuntime() = default;

}  // namespace xfnl
