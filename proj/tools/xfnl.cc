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

// Command-line entry point.
//
//   xfnl run --dataset F --taxonomy F [--gen-url U | --gen-test oracle|corrupt]
//            [--embed-url U | --embed-test --dim D] [--seed S] [--k K] ...
//   xfnl serve --config F --port P
//   xfnl review build --dataset F --taxonomy F --predictions F --out F
//   xfnl review report --tasks F --annotations F
//
// Exit codes: 0 success, 1 other failure, 2 config error, 3 backend failure
// threshold exceeded.

#include <pthread.h>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "httplib.h"
#include "spdlog/spdlog.h"
#include "xfnl/error.h"
#include "xfnl/pipeline.h"
#include "xfnl/review.h"
#include "xfnl/service.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;

int ExitCodeFor(const xfnl::Error& e) {
  switch (e.code()) {
    case xfnl::ErrorCode::kConfig:
    case xfnl::ErrorCode::kMalformedRecord:
    case xfnl::ErrorCode::kSpanMismatch:
    case xfnl::ErrorCode::kUnknownTag:
    case xfnl::ErrorCode::kDuplicateSid:
    case xfnl::ErrorCode::kDuplicateTag:
    case xfnl::ErrorCode::kDuplicateDocumentation:
      return kExitConfig;
    case xfnl::ErrorCode::kFailureThreshold:
      return kExitBackend;
    default:
      return kExitFailure;
  }
}

std::string EnvOr(const char* name) {
  const char* v = std::getenv(name);
  return v == nullptr ? std::string() : std::string(v);
}

struct RunFlags {
  xfnl::PipelineConfig config;
  std::string mode = "instruct";
  std::string target = "doc";
  std::string gen_test;
  std::vector<std::size_t> bucket_edges;
  bool exclude_others_macro = false;
  bool exclude_others_hits = false;
  bool full_taxonomy = false;
};

void AddRunOptions(CLI::App& app, RunFlags& f) {
  auto& c = f.config;
  app.add_option("--dataset", c.dataset_path, "Dataset file (JSON lines)")
      ->required();
  app.add_option("--taxonomy", c.taxonomy_path, "Taxonomy file (JSON lines)")
      ->required();
  app.add_option("--instruction-file", c.instruction_path,
                 "Instruction preamble (defaults to the bundled one)");
  app.add_option("--mode", f.mode, "Prompt mode")
      ->check(CLI::IsMember({"instruct", "plain"}));
  app.add_option("--target", f.target, "Generation target / index rows")
      ->check(CLI::IsMember({"doc", "tagwords"}));
  app.add_option("--gen-url", c.gen_url,
                 "Generation service base URL (env XFNL_GEN_URL)");
  app.add_option("--gen-test", f.gen_test, "In-process test generator")
      ->check(CLI::IsMember({"oracle", "corrupt"}));
  app.add_option("--corrupt-rate", c.corruption.deletion,
                 "Word deletion rate of the corrupting generator")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--substitute-rate", c.corruption.substitution,
                 "Word substitution rate of the corrupting generator")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--seed", c.seed, "Seed of the test generator and embedder");
  app.add_option("--embed-url", c.embed_url,
                 "Embedding service base URL (env XFNL_EMBED_URL)");
  app.add_flag("--embed-test", c.embed_test, "Use the in-process test embedder");
  app.add_option("--dim", c.embed_dim, "Test embedder dimension");
  app.add_option("--k", c.k, "Ranking depth")->check(CLI::PositiveNumber);
  app.add_option("--max-new-tokens", c.max_new_tokens, "Generation cap")
      ->check(CLI::PositiveNumber);
  app.add_option("--concurrency", c.concurrency, "Worker pool size")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-failure-rate", c.max_failure_fraction,
                 "Abort when more mentions fail")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--bucket-edges", f.bucket_edges,
                 "Upper bounds of the frequency buckets");
  app.add_flag("--exclude-others-macro", f.exclude_others_macro);
  app.add_flag("--exclude-others-hits", f.exclude_others_hits);
  app.add_flag("--full-taxonomy-classes", f.full_taxonomy);
  app.add_option("--report-out", c.report_out, "Report JSON path");
  app.add_option("--prompts-out", c.prompts_out, "Rendered prompts path");
  app.add_option("--predictions-out", c.predictions_out,
                 "Predictions path (input of `review build`)");
  app.add_option("--index-cache", c.index_cache, "Index cache path");
  app.add_option("--journal", c.journal_path,
                 "Completed-mention journal (default <report-out>.journal)");
  app.add_flag("--resume", c.resume, "Skip mentions found in the journal");
}

int Run(RunFlags& f) {
  auto& c = f.config;
  c.mode.with_instruction = f.mode == "instruct";
  c.mode.target = f.target == "doc" ? xfnl::TargetKind::kDocumentation
                                    : xfnl::TargetKind::kTagWords;
  if (f.gen_test == "oracle") c.gen_test = xfnl::GenerationTest::kOracle;
  if (f.gen_test == "corrupt") c.gen_test = xfnl::GenerationTest::kCorrupt;
  if (c.gen_url.empty() && c.gen_test == xfnl::GenerationTest::kNone) {
    c.gen_url = EnvOr("XFNL_GEN_URL");
  }
  if (c.embed_url.empty() && !c.embed_test) {
    c.embed_url = EnvOr("XFNL_EMBED_URL");
  }
  if (c.journal_path.empty() && !c.report_out.empty()) {
    c.journal_path = c.report_out + ".journal";
  }
  if (!f.bucket_edges.empty()) {
    c.eval.bucket_edges = xfnl::BucketEdges(f.bucket_edges);
  }
  c.eval.others_in_macro = !f.exclude_others_macro;
  c.eval.others_in_hits = !f.exclude_others_hits;
  c.eval.full_taxonomy_classes = f.full_taxonomy;
  c.http.max_in_flight = static_cast<std::ptrdiff_t>(c.concurrency);

  const xfnl::PipelineResult result = xfnl::RunPipeline(c);
  std::cout << xfnl::FormatReport(result.report);
  return 0;
}

int Serve(const std::string& config_path, int port) {
  const xfnl::ServeConfig config = xfnl::LoadServeConfig(config_path);

  // Signals go to a dedicated waiter thread that stops the server, which
  // lets in-flight requests finish.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  xfnl::ServiceRuntime runtime(config);
  httplib::Server server;
  runtime.service().Mount(server);
  if (!server.bind_to_port(config.host, port)) {
    throw xfnl::Error(xfnl::ErrorCode::kConfig,
                      "cannot bind " + config.host + ":" + std::to_string(port));
  }
  std::jthread waiter([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {}; shutting down", sig);
    server.stop();
  });
  spdlog::info("listening on {}:{}", config.host, port);
  server.listen_after_bind();
  // Unblock the waiter if the server stopped on its own.
  pthread_kill(waiter.native_handle(), SIGTERM);
  return 0;
}

int ReviewBuild(const std::string& dataset, const std::string& taxonomy,
                const std::string& predictions, std::size_t k,
                std::uint64_t seed, const std::string& out) {
  const auto corpus = xfnl::Corpus::Load(dataset, taxonomy);
  const auto preds = xfnl::ReadPredictions(predictions);
  const auto tasks = xfnl::BuildReviewTasks(preds, corpus, k, seed);
  xfnl::WriteFile(out, xfnl::SerializeTasks(tasks));
  spdlog::info("wrote {} review tasks to {}", tasks.size(), out);
  return 0;
}

int ReviewReport(const std::string& tasks_path,
                 const std::string& annotations_path, const std::string& out) {
  const auto tasks = xfnl::ParseTasks(xfnl::ReadFile(tasks_path));
  const auto annotations =
      xfnl::ParseAnnotations(xfnl::ReadFile(annotations_path));
  const std::string doc =
      xfnl::AgreementToJson(xfnl::ComputeAgreement(annotations, tasks)).dump(2) +
      "\n";
  if (!out.empty()) xfnl::WriteFile(out, doc);
  std::cout << doc;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Financial numeral tagging pipeline"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Tag and evaluate the test split");
  AddRunOptions(*run, run_flags);

  std::string serve_config;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve tagging and review endpoints");
  serve->add_option("--config", serve_config, "Service config JSON")->required();
  serve->add_option("--port", port, "Listen port")->check(CLI::Range(1, 65535));

  auto* review = app.add_subcommand("review", "Expert review workflow");
  review->require_subcommand(1);
  std::string dataset, taxonomy, predictions, out, tasks, annotations;
  std::size_t review_k = 5;
  std::uint64_t review_seed = 0;
  auto* build = review->add_subcommand("build", "Build review tasks");
  build->add_option("--dataset", dataset)->required();
  build->add_option("--taxonomy", taxonomy)->required();
  build->add_option("--predictions", predictions)->required();
  build->add_option("--k", review_k)->check(CLI::Range(2, 1000));
  build->add_option("--seed", review_seed);
  build->add_option("--out", out)->required();
  auto* report = review->add_subcommand("report", "Annotator agreement report");
  report->add_option("--tasks", tasks)->required();
  report->add_option("--annotations", annotations)->required();
  report->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return Run(run_flags);
    if (*serve) return Serve(serve_config, port);
    if (*build) {
      return ReviewBuild(dataset, taxonomy, predictions, review_k, review_seed,
                         out);
    }
    if (*report) return ReviewReport(tasks, annotations, out);
  } catch (const xfnl::Error& e) {
    spdlog::error("{}", e.what());
    return ExitCodeFor(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
