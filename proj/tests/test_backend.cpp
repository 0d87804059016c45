#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "summafact/backend.hpp"
#include "summafact/errors.hpp"
#include "summafact/filter.hpp"
#include "summafact/util.hpp"
#include "test_support.hpp"

using namespace summafact;
using summafact::testing::TempDir;
using summafact::testing::write_file;

namespace {

std::shared_ptr<MockBackend> script_backend(const nlohmann::json& script) {
  TempDir dir;
  write_file(dir.file("script.json"), script.dump());
  return MockBackend::from_script(dir.file("script.json"));
}

}  // namespace

TEST_CASE("mock rules answer by first match") {
  auto backend = script_backend(
      {{"embedding_dim", 4},
       {"seed", 1},
       {"rules",
        {{{"match", "hallucinated"}, {"replies", {"yes"}}},
         {{"match", "Score"}, {"replies", {"7", "10"}}}}}});

  ChatRequest req;
  req.user = "Is this hallucinated?";
  CHECK(backend->chat(req).text == "yes");

  req.user = "Score the following summary";
  CHECK(backend->chat(req).text == "7");
  CHECK(backend->chat(req).text == "10");
  // exhausted rules repeat their final reply
  CHECK(backend->chat(req).text == "10");
}

TEST_CASE("mock regex rules") {
  auto backend = script_backend(
      {{"embedding_dim", 4},
       {"seed", 1},
       {"rules", {{{"match", "Score[\\s\\S]*alpha"}, {"is_regex", true}, {"replies", {"9"}}}}}});
  ChatRequest req;
  req.user = "Score this:\nsomething about alpha town";
  CHECK(backend->chat(req).text == "9");
}

TEST_CASE("unscripted prompts fail with the prompt head in the message") {
  auto backend = script_backend({{"embedding_dim", 4}, {"seed", 1}, {"rules", nlohmann::json::array()}});
  ChatRequest req;
  req.user = "Completely unexpected prompt text";
  try {
    backend->chat(req);
    FAIL("expected unscripted error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unscripted);
    CHECK(std::string(e.what()).find("Completely unexpected") != std::string::npos);
  }
}

TEST_CASE("malformed scripts are configuration errors") {
  TempDir dir;
  write_file(dir.file("bad.json"), "{not json");
  CHECK_THROWS_AS(MockBackend::from_script(dir.file("bad.json")), Error);
  write_file(dir.file("nodim.json"), R"({"rules":[]})");
  CHECK_THROWS_AS(MockBackend::from_script(dir.file("nodim.json")), Error);
  CHECK_THROWS_AS(MockBackend::from_script(dir.file("missing.json")), Error);
}

TEST_CASE("mock embeddings are deterministic per token") {
  MockBackend backend(16, 42, {});
  auto vecs = backend.embed({"cat", "cat", "dog"});
  REQUIRE(vecs.size() == 3);
  CHECK(cosine(vecs[0], vecs[1]) == doctest::Approx(1.0).epsilon(1e-12));
  double cd = cosine(vecs[0], vecs[2]);
  CHECK(cd >= -1.0);
  CHECK(cd <= 1.0);
  CHECK(cd != doctest::Approx(1.0));

  // same seed, fresh instance: identical vectors
  MockBackend other(16, 42, {});
  auto again = other.embed({"cat"});
  for (int d = 0; d < 16; ++d)
    CHECK(again[0].values[d] == doctest::Approx(vecs[0].values[d]).epsilon(1e-15));
}

TEST_CASE("embedding normalization is case-insensitive") {
  MockBackend backend(8, 5, {});
  auto vecs = backend.embed({"Cat", "cat."});
  CHECK(cosine(vecs[0], vecs[1]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("embed validates inputs and preserves order") {
  MockBackend backend(8, 5, {});
  CHECK_THROWS_AS(backend.embed({}), Error);
  CHECK_THROWS_AS(backend.embed({"ok", ""}), Error);

  auto vecs = backend.embed({"one", "two", "one"});
  CHECK(cosine(vecs[0], vecs[2]) == doctest::Approx(1.0));
  CHECK(vecs.size() == 3);
}

TEST_CASE("gateway validates chat requests before any call") {
  MockBackend backend(8, 5, {});
  ChatRequest empty;
  CHECK_THROWS_AS(backend.chat(empty), Error);
  ChatRequest hot;
  hot.user = "x";
  hot.temperature = 3.0;
  CHECK_THROWS_AS(backend.chat(hot), Error);
  CHECK(backend.audit_log()->count() == 0);
}

TEST_CASE("audit log holds one entry per successful call") {
  TempDir dir;
  auto backend = script_backend(
      {{"embedding_dim", 4}, {"seed", 1}, {"rules", {{{"match", "hi"}, {"replies", {"hello"}}}}}});
  auto log = std::make_shared<AuditLog>(dir.file("audit.jsonl"));
  backend->set_audit_log(log);

  ChatRequest req;
  req.user = "hi there";
  backend->chat(req);
  backend->embed({"token"});
  req.user = "completely unmatched words";
  CHECK_THROWS_AS(backend->chat(req), Error);

  CHECK(log->count() == 2);
  CHECK(log->count("chat") == 1);
  CHECK(log->count("embed") == 1);
  auto entries = log->entries();
  CHECK(entries[0].prompt_sha256 == sha256_hex("hi there"));
  CHECK(entries[0].response_sha256 == sha256_hex("hello"));

  // file mirror is valid JSONL with the expected fields
  std::string file = summafact::testing::slurp(dir.file("audit.jsonl"));
  auto first_line = file.substr(0, file.find('\n'));
  auto j = nlohmann::json::parse(first_line);
  CHECK(j.contains("ts"));
  CHECK(j["kind"] == "chat");
  CHECK(j.contains("prompt_sha256"));
  CHECK(j.contains("response_sha256"));
  CHECK(j.contains("latency_ms"));
}

namespace {

// counts how many chat calls overlap in time
class SlowBackend : public Backend {
 public:
  std::atomic<int> active{0};
  std::atomic<int> peak{0};

  std::string id() const override { return "slow"; }

 protected:
  std::string do_chat(const ChatRequest&) override {
    int now = active.fetch_add(1) + 1;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(15));
    active.fetch_sub(1);
    return "ok";
  }
  std::vector<std::vector<double>> do_embed(const std::vector<std::string>&) override {
    return {};
  }
};

}  // namespace

TEST_CASE("the in-flight gate bounds concurrent requests") {
  SlowBackend backend;
  backend.set_max_inflight(2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i)
    threads.emplace_back([&] {
      ChatRequest req;
      req.user = "go";
      backend.chat(req);
    });
  for (auto& t : threads) t.join();
  CHECK(backend.peak.load() <= 2);
  CHECK(backend.audit_log()->count("chat") == 6);
}

TEST_CASE("the gateway rejects dimension changes within one run") {
  summafact::testing::FixedBackend backend;
  backend.embeddings["a"] = {1.0, 0.0};
  backend.embeddings["b"] = {0.0, 1.0, 0.0};  // different dim
  backend.embed({"a"});
  CHECK_THROWS_WITH_AS(backend.embed({"b"}), doctest::Contains("dimension"), Error);
}

TEST_CASE("the gateway rejects zero embedding vectors") {
  summafact::testing::FixedBackend backend;
  backend.embeddings["z"] = {0.0, 0.0};
  CHECK_THROWS_WITH_AS(backend.embed({"z"}), doctest::Contains("zero"), Error);
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::string long_input(200, 'x');
  CHECK(sha256_hex(long_input).size() == 64);
}

// ---------------------------------------------------------------------------
// live backend over an injected transport
// ---------------------------------------------------------------------------

TEST_CASE("live backend parses chat and embedding responses") {
  LiveConfig config;
  config.base_url = "http://example.test";
  config.chat_model = "demo-chat";
  config.embed_model = "demo-embed";

  std::vector<std::string> seen_paths;
  Transport fake = [&](const std::string& method, const std::string& path,
                       const std::string& body) -> HttpResult {
    seen_paths.push_back(method + " " + path);
    if (path == "/v1/chat/completions") {
      auto req = nlohmann::json::parse(body);
      CHECK(req["model"] == "demo-chat");
      CHECK(req["messages"][0]["role"] == "user");
      nlohmann::json res = {{"choices", {{{"message", {{"content", "pong"}}}}}}};
      return {true, 200, res.dump(), ""};
    }
    nlohmann::json res = {{"data",
                           {{{"embedding", {0.0, 1.0}}, {"index", 1}},
                            {{"embedding", {1.0, 0.0}}, {"index", 0}}}}};
    return {true, 200, res.dump(), ""};
  };

  LiveBackend backend(config, fake);
  ChatRequest req;
  req.user = "ping";
  CHECK(backend.chat(req).text == "pong");

  auto vecs = backend.embed({"first", "second"});
  REQUIRE(vecs.size() == 2);
  CHECK(vecs[0].values == std::vector<double>{1.0, 0.0});  // index field wins over order
  CHECK(vecs[1].values == std::vector<double>{0.0, 1.0});
  CHECK(seen_paths[0] == "POST /v1/chat/completions");
}

TEST_CASE("transport failures retry up to the attempt budget") {
  LiveConfig config;
  config.base_url = "http://example.test";
  config.retry.retries = 2;
  config.retry.initial_delay_ms = 1;

  std::atomic<int> attempts{0};
  Transport failing = [&](const std::string&, const std::string&,
                          const std::string&) -> HttpResult {
    attempts.fetch_add(1);
    return {false, 0, "", "connection refused"};
  };

  LiveBackend backend(config, failing);
  ChatRequest req;
  req.user = "ping";
  try {
    backend.chat(req);
    FAIL("expected transport error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::transport);
    CHECK(std::string(e.what()).find("3 attempts") != std::string::npos);
  }
  CHECK(attempts.load() == 3);
}

TEST_CASE("server errors retry, client errors do not") {
  LiveConfig config;
  config.base_url = "http://example.test";
  config.retry.retries = 3;
  config.retry.initial_delay_ms = 1;

  std::atomic<int> attempts{0};
  Transport flaky = [&](const std::string&, const std::string&,
                        const std::string&) -> HttpResult {
    int n = attempts.fetch_add(1);
    if (n < 2) return {true, 500, "overloaded", ""};
    nlohmann::json res = {{"choices", {{{"message", {{"content", "ok"}}}}}}};
    return {true, 200, res.dump(), ""};
  };
  LiveBackend backend(config, flaky);
  ChatRequest req;
  req.user = "ping";
  CHECK(backend.chat(req).text == "ok");
  CHECK(attempts.load() == 3);

  std::atomic<int> called{0};
  Transport denied = [&](const std::string&, const std::string&,
                         const std::string&) -> HttpResult {
    called.fetch_add(1);
    return {true, 401, R"({"error":"bad key"})", ""};
  };
  LiveBackend denied_backend(config, denied);
  try {
    denied_backend.chat(req);
    FAIL("expected backend error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::backend);
    CHECK(std::string(e.what()).find("401") != std::string::npos);
  }
  CHECK(called.load() == 1);
}

TEST_CASE("live backend round trip against a local http server") {
  httplib::Server server;
  std::atomic<int> chat_hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    chat_hits.fetch_add(1);
    auto body = nlohmann::json::parse(req.body);
    std::string prompt = body["messages"].back()["content"];
    nlohmann::json out = {{"choices", {{{"message", {{"content", "echo: " + prompt}}}}}}};
    res.set_content(out.dump(), "application/json");
  });
  server.Get("/v1/models", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"data":[]})", "application/json");
  });

  int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  LiveConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.chat_model = "demo";
  LiveBackend backend(config);
  backend.probe();

  ChatRequest req;
  req.user = "hello";
  CHECK(backend.chat(req).text == "echo: hello");
  CHECK(chat_hits.load() == 1);

  server.stop();
  server_thread.join();
}
