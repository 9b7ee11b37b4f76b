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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <thread>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "httplib.h"
#include "json.hpp"
#include "support/synthetic.h"
#include "xfnl/backends.h"
#include "xfnl/error.h"
#include "xfnl/matcher.h"
#include "xfnl/review.h"
#include "xfnl/service.h"

namespace xfnl {
namespace {

using nlohmann::json;
using ::testing::HasSubstr;
using namespace std::chrono_literals;

// An httplib server on an ephemeral loopback port, listening on its own
// thread for the lifetime of the object.
class LocalServer {
 public:
  LocalServer() { port_ = server_.bind_to_any_port("127.0.0.1"); }
  ~LocalServer() { Stop(); }

  httplib::Server& server() { return server_; }
  void Start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void Stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

// A loopback port with no listener: bound to an ephemeral port, then closed.
int UnusedPort() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

HttpClientOptions FastRetry() {
  HttpClientOptions o;
  o.retry.base_backoff = 20ms;
  o.timeout = 5s;
  return o;
}

TEST(HttpGeneration, PostsInputAndTokenCap) {
  LocalServer s;
  json seen;
  s.server().Post("/v1/generate", [&](const httplib::Request& req,
                                      httplib::Response& res) {
    seen = json::parse(req.body);
    res.set_content(R"({"text": " Fair value of debt. "})", "application/json");
  });
  s.Start();
  HttpGenerationClient client(s.url());
  EXPECT_EQ(Generate(client, {"prompt text", 30}).text, "Fair value of debt.");
  EXPECT_EQ(seen["input"], "prompt text");
  EXPECT_EQ(seen["max_new_tokens"], 30);
}

TEST(HttpGeneration, UrlPrefixIsKept) {
  LocalServer s;
  s.server().Post("/api/v1/generate",
                  [](const httplib::Request&, httplib::Response& res) {
                    res.set_content(R"({"text": "ok"})", "application/json");
                  });
  s.Start();
  HttpGenerationClient client(s.url() + "/api/");
  EXPECT_EQ(client.Complete({"x"}), "ok");
}

TEST(HttpGeneration, Non200IsNotRetried) {
  LocalServer s;
  std::atomic<int> calls = 0;
  s.server().Post("/v1/generate",
                  [&](const httplib::Request&, httplib::Response& res) {
                    ++calls;
                    res.status = 503;
                  });
  s.Start();
  HttpGenerationClient client(s.url(), FastRetry());
  EXPECT_EQ(testing::ErrorCodeOf([&] { client.Complete({"x"}); }),
            ErrorCode::kBackendStatus);
  EXPECT_EQ(calls.load(), 1);
}

TEST(HttpGeneration, MalformedBodies) {
  LocalServer s;
  std::string body = "not json";
  s.server().Post("/v1/generate",
                  [&](const httplib::Request&, httplib::Response& res) {
                    res.set_content(body, "application/json");
                  });
  s.Start();
  HttpGenerationClient client(s.url(), FastRetry());
  EXPECT_EQ(testing::ErrorCodeOf([&] { client.Complete({"x"}); }),
            ErrorCode::kBackendStatus);
  body = R"({"output": "x"})";
  EXPECT_EQ(testing::ErrorCodeOf([&] { client.Complete({"x"}); }),
            ErrorCode::kBackendStatus);
  body = R"({"text": "  "})";
  EXPECT_EQ(testing::ErrorCodeOf([&] { Generate(client, {"x"}); }),
            ErrorCode::kEmptyResponse);
}

TEST(HttpGeneration, TransportFailureRetriesWithBackoff) {
  HttpGenerationClient client("http://127.0.0.1:" + std::to_string(UnusedPort()),
                              FastRetry());
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(testing::ErrorCodeOf([&] { client.Complete({"x"}); }),
            ErrorCode::kTransport);
  // Two sleeps: 20 ms then 40 ms.
  EXPECT_GE(std::chrono::steady_clock::now() - start, 60ms);
}

TEST(HttpGeneration, DeadlineStopsRetrying) {
  HttpClientOptions o = FastRetry();
  o.retry.attempts = 10;
  o.retry.base_backoff = 200ms;
  o.retry.deadline = 100ms;
  HttpGenerationClient client("http://127.0.0.1:" + std::to_string(UnusedPort()),
                              o);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(testing::ErrorCodeOf([&] { client.Complete({"x"}); }),
            ErrorCode::kTransport);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 2s);
}

TEST(HttpGeneration, InFlightCap) {
  LocalServer s;
  std::atomic<int> current = 0;
  std::atomic<int> peak = 0;
  s.server().new_task_queue = [] { return new httplib::ThreadPool(16); };
  s.server().Post("/v1/generate",
                  [&](const httplib::Request&, httplib::Response& res) {
                    const int now = ++current;
                    int p = peak.load();
                    while (now > p && !peak.compare_exchange_weak(p, now)) {
                    }
                    std::this_thread::sleep_for(30ms);
                    --current;
                    res.set_content(R"({"text": "ok"})", "application/json");
                  });
  s.Start();
  HttpClientOptions o = FastRetry();
  o.max_in_flight = 2;
  HttpGenerationClient client(s.url(), o);
  std::vector<std::jthread> workers;
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back([&] { client.Complete({"x"}); });
  }
  workers.clear();
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(HttpEmbedding, BatchesAndPreservesOrder) {
  LocalServer s;
  std::vector<std::size_t> batch_sizes;
  std::mutex mu;
  s.server().Post("/v1/embed", [&](const httplib::Request& req,
                                   httplib::Response& res) {
    const json doc = json::parse(req.body);
    json vectors = json::array();
    for (const auto& t : doc["texts"]) {
      const double x = std::stod(t.get<std::string>());
      vectors.push_back({x, 1.0, 0.0});
    }
    {
      std::lock_guard lock(mu);
      batch_sizes.push_back(doc["texts"].size());
    }
    res.set_content(json{{"vectors", vectors}, {"dim", 3}}.dump(),
                    "application/json");
  });
  s.Start();
  HttpClientOptions o = FastRetry();
  o.embed_batch_size = 4;
  HttpEmbeddingClient client(s.url(), o);
  std::vector<std::string> texts;
  for (int i = 1; i <= 10; ++i) texts.push_back(std::to_string(i));
  const auto vectors = Embed(client, texts);
  ASSERT_EQ(vectors.size(), 10);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(vectors[i].values[0], i + 1);
  EXPECT_EQ(batch_sizes, (std::vector<std::size_t>{4, 4, 2}));
}

TEST(HttpEmbedding, DimensionChangeAcrossBatches) {
  LocalServer s;
  std::atomic<int> calls = 0;
  s.server().Post("/v1/embed", [&](const httplib::Request& req,
                                   httplib::Response& res) {
    const json doc = json::parse(req.body);
    const std::size_t dim = ++calls == 1 ? 3 : 4;
    json vectors = json::array();
    for (std::size_t i = 0; i < doc["texts"].size(); ++i) {
      vectors.push_back(std::vector<double>(dim, 1.0));
    }
    res.set_content(json{{"vectors", vectors}, {"dim", dim}}.dump(),
                    "application/json");
  });
  s.Start();
  HttpClientOptions o = FastRetry();
  o.embed_batch_size = 1;
  HttpEmbeddingClient client(s.url(), o);
  const std::vector<std::string> texts = {"a", "b"};
  EXPECT_EQ(testing::ErrorCodeOf([&] { client.EmbedTexts(texts); }),
            ErrorCode::kDimensionMismatch);
}

TEST(HttpEmbedding, RowLengthMustMatchDeclaredDim) {
  LocalServer s;
  s.server().Post("/v1/embed",
                  [](const httplib::Request&, httplib::Response& res) {
                    res.set_content(R"({"vectors": [[1, 2]], "dim": 3})",
                                    "application/json");
                  });
  s.Start();
  HttpEmbeddingClient client(s.url(), FastRetry());
  const std::vector<std::string> texts = {"a"};
  EXPECT_EQ(testing::ErrorCodeOf([&] { client.EmbedTexts(texts); }),
            ErrorCode::kDimensionMismatch);
}

// Service fixture: the share-count taxonomy, a fixed generator and the test
// embedder.
class FixedGenerator : public GenerationBackend {
 public:
  std::string text;
  std::string last_input;
  std::string Complete(const GenerationRequest& request) override {
    last_input = request.input_text;
    return text;
  }
};

std::vector<ReviewTask> ReviewFixture() {
  ReviewTask t;
  t.sid = "s1";
  t.mention_index = 0;
  t.task_id = "s1#0";
  t.text = "Authorized 500 shares.";
  t.highlight_start = 11;
  t.highlight_end = 14;
  t.candidates = {{"common stocks shares authorized", "Authorized."},
                  {"common stocks shares issued", "Issued."},
                  {"others", "others"}};
  t.machine_top1 = "common stocks shares issued";
  t.gold = "common stocks shares authorized";
  ReviewTask u = t;
  u.sid = "s2";
  u.task_id = "s2#0";
  u.machine_top1 = u.gold;
  return {t, u};
}

class ServiceTest : public ::testing::Test {
 protected:
  ServiceTest()
      : taxonomy_(testing::ShareCountTags()),
        embedder_(4096, 1),
        index_(TagIndex::Build(taxonomy_, embedder_)),
        store_(ReviewFixture(), testing::TempPath("service_annotations.jsonl")),
        service_(taxonomy_, index_, generator_, embedder_, {},
                 std::string(DefaultInstruction()), 3, &store_) {
    generator_.text = taxonomy_.Get("common stocks shares authorized").documentation;
  }
  static void SetUpTestSuite() {
    std::filesystem::remove(testing::TempPath("service_annotations.jsonl"));
  }

  Taxonomy taxonomy_;
  FixedGenerator generator_;
  TestEmbedder embedder_;
  TagIndex index_;
  ReviewStore store_;
  TaggingService service_;
};

TEST_F(ServiceTest, TagReturnsRankedCandidates) {
  const auto r = service_.Tag(
      R"({"text": "There were 500 shares authorized.", "numeral": "500"})");
  ASSERT_EQ(r.status, 200) << r.body;
  const json doc = json::parse(r.body);
  ASSERT_EQ(doc["candidates"].size(), 3);
  EXPECT_EQ(doc["candidates"][0]["tag"], "common stocks shares authorized");
  EXPECT_DOUBLE_EQ(doc["candidates"][0]["score"].get<double>(), 1.0);
  EXPECT_GE(doc["candidates"][0]["score"].get<double>(),
            doc["candidates"][1]["score"].get<double>());
  EXPECT_THAT(doc["candidates"][0]["documentation"].get<std::string>(),
              HasSubstr("maximum number"));
  EXPECT_THAT(generator_.last_input,
              HasSubstr("What is the tag associated with the numeral 500?"));
}

TEST_F(ServiceTest, TagValidation) {
  EXPECT_EQ(service_.Tag("{").status, 400);
  EXPECT_EQ(service_.Tag(R"({"text": "a 5"})").status, 400);
  EXPECT_EQ(service_.Tag(R"({"text": " ", "numeral": "5"})").status, 400);
  EXPECT_EQ(service_.Tag(R"({"text": "a 5", "numeral": "6"})").status, 422);
  generator_.text = " ";
  EXPECT_EQ(service_.Tag(R"({"text": "a 5", "numeral": "5"})").status, 502);
}

TEST_F(ServiceTest, ReviewFlow) {
  auto next = service_.NextTask("ann1");
  ASSERT_EQ(next.status, 200);
  const json task = json::parse(next.body);
  EXPECT_EQ(task["task_id"], "s1#0");
  EXPECT_FALSE(task.contains("gold"));
  EXPECT_FALSE(task.contains("machine_top1"));
  EXPECT_EQ(next.body.find("gold"), std::string::npos);

  EXPECT_EQ(service_.NextTask("").status, 400);
  EXPECT_EQ(
      service_.Annotate(R"({"task_id": "s1#0", "annotator": "ann1", "chosen": "revenues"})")
          .status,
      422);
  EXPECT_EQ(
      service_.Annotate(R"({"task_id": "nope", "annotator": "ann1", "chosen": "others"})")
          .status,
      404);
  EXPECT_EQ(service_.Annotate(R"({"task_id": "s1#0"})").status, 400);
  EXPECT_EQ(service_.Agreement().status, 200);

  for (const std::string task_id : {"s1#0", "s2#0"}) {
    for (const std::string ann : {"ann1", "ann2"}) {
      const auto r = service_.Annotate(
          json{{"task_id", task_id},
               {"annotator", ann},
               {"chosen", "common stocks shares authorized"}}
              .dump());
      EXPECT_EQ(r.status, 200) << r.body;
    }
  }
  EXPECT_EQ(
      service_.Annotate(R"({"task_id": "s1#0", "annotator": "ann1", "chosen": "others"})")
          .status,
      409);
  EXPECT_EQ(service_.NextTask("ann1").status, 204);
  EXPECT_EQ(service_.NextTask("ann3").status, 204);

  const json report = json::parse(service_.Agreement().body);
  EXPECT_EQ(report["overall"]["tasks"], 2);
  EXPECT_DOUBLE_EQ(report["overall"]["agreement"].get<double>(), 1.0);
}

TEST_F(ServiceTest, WithoutStoreReviewEndpointsAre404) {
  TaggingService bare(taxonomy_, index_, generator_, embedder_, {},
                      std::string(DefaultInstruction()), 3, nullptr);
  EXPECT_EQ(bare.NextTask("a").status, 404);
  EXPECT_EQ(bare.Annotate("{}").status, 404);
  EXPECT_EQ(bare.Agreement().status, 404);
}

TEST_F(ServiceTest, OverRealSocket) {
  LocalServer s;
  service_.Mount(s.server());
  s.Start();
  httplib::Client client(s.url());
  auto tag = client.Post("/tag", R"({"text": "500 shares", "numeral": "500"})",
                         "application/json");
  ASSERT_TRUE(tag);
  EXPECT_EQ(tag->status, 200);
  EXPECT_EQ(json::parse(tag->body)["candidates"][0]["tag"],
            "common stocks shares authorized");

  auto next = client.Get("/tasks/next?annotator=x");
  ASSERT_TRUE(next);
  EXPECT_EQ(next->status, 200);
  EXPECT_EQ(next->body.find("gold"), std::string::npos);
  EXPECT_EQ(next->body.find("machine_top1"), std::string::npos);

  auto bad = client.Post(
      "/annotations",
      R"({"task_id": "s1#0", "annotator": "x", "chosen": "revenues"})",
      "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 422);

  auto report = client.Get("/reports/agreement");
  ASSERT_TRUE(report);
  EXPECT_EQ(report->status, 200);
}

}  // namespace
}  // namespace xfnl
