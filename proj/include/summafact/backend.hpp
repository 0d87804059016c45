#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace summafact {

struct ChatRequest {
  std::optional<std::string> system;
  std::string user;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed;
};

struct ChatResponse {
  std::string text;
  std::string backend_id;
  std::chrono::milliseconds latency{0};
};

struct EmbeddingVector {
  std::vector<double> values;

  int dim() const { return static_cast<int>(values.size()); }
  double norm() const;
};

struct AuditEntry {
  std::int64_t ts_ms = 0;
  std::string kind;  // "chat" | "embed"
  std::string prompt_sha256;
  std::string response_sha256;
  std::int64_t latency_ms = 0;
};

/// Thread-safe call journal. Keeps entries in memory and, when given a
/// path, mirrors each record to a JSONL file.
class AuditLog {
 public:
  AuditLog() = default;
  explicit AuditLog(const std::filesystem::path& file);

  void record(AuditEntry entry);
  std::vector<AuditEntry> entries() const;
  std::size_t count(std::string_view kind = {}) const;

 private:
  mutable std::mutex mu_;
  std::vector<AuditEntry> entries_;
  std::filesystem::path file_;
};

/// Gateway for all model traffic: text generation and embedding. Validates
/// requests, enforces the in-flight cap, journals every successful call.
class Backend {
 public:
  virtual ~Backend() = default;

  ChatResponse chat(const ChatRequest& req);
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

  virtual std::string id() const = 0;

  void set_audit_log(std::shared_ptr<AuditLog> log) { audit_ = std::move(log); }
  std::shared_ptr<AuditLog> audit_log() const { return audit_; }

  void set_max_inflight(int n);

  class InflightGate;

 protected:
  virtual std::string do_chat(const ChatRequest& req) = 0;
  virtual std::vector<std::vector<double>> do_embed(const std::vector<std::string>& texts) = 0;

 private:
  std::shared_ptr<AuditLog> audit_ = std::make_shared<AuditLog>();
  std::shared_ptr<InflightGate> gate_;
  std::mutex dim_mu_;
  int run_dim_ = 0;  // locked in by the first embed call
};

// ---------------------------------------------------------------------------
// Scriptable mock
// ---------------------------------------------------------------------------

struct MockRule {
  std::string match;
  bool is_regex = false;
  std::vector<std::string> replies;
};

/// Deterministic offline backend. Chat replies come from ordered pattern
/// rules (first match wins; a rule's replies are consumed in sequence and
/// the last one repeats once exhausted). Embeddings are seeded-hash unit
/// vectors: every normalized token maps to the same pseudo-random direction,
/// multi-token texts embed as the normalized mean of their token vectors.
class MockBackend : public Backend {
 public:
  MockBackend(int embedding_dim, std::uint64_t seed, std::vector<MockRule> rules);

  static std::shared_ptr<MockBackend> from_script(const std::filesystem::path& path,
                                                  std::uint64_t extra_seed = 0);

  std::string id() const override;

  /// Unit vector assigned to one normalized token.
  std::vector<double> token_vector(std::string_view token) const;

 protected:
  std::string do_chat(const ChatRequest& req) override;
  std::vector<std::vector<double>> do_embed(const std::vector<std::string>& texts) override;

 private:
  struct CompiledRule;
  int dim_;
  std::uint64_t seed_;
  std::vector<MockRule> rules_;
  std::vector<std::shared_ptr<CompiledRule>> compiled_;
  std::vector<std::size_t> next_reply_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Live HTTP client
// ---------------------------------------------------------------------------

struct RetryPolicy {
  int retries = 2;  // total attempts = retries + 1
  int initial_delay_ms = 250;
  double backoff_factor = 2.0;
  double jitter = 0.25;
};

struct LiveConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::string chat_model;
  std::string embed_model;
  std::string api_key_env = "SUMMAFACT_API_KEY";
  RetryPolicy retry;
};

struct HttpResult {
  bool ok = false;       // transport-level success
  int status = 0;        // HTTP status when ok
  std::string body;
  std::string error;     // transport error description when !ok
};

/// (method, path, json_body) -> result. The default transport speaks HTTP
/// via cpp-httplib; tests inject fakes to exercise retry and parsing.
using Transport = std::function<HttpResult(const std::string& method, const std::string& path,
                                           const std::string& body)>;

/// OpenAI-compatible client: POST {base}/v1/chat/completions and
/// POST {base}/v1/embeddings, bearer token from the configured env var.
/// Transient failures (transport, 429, 5xx) are retried with exponential
/// backoff and jitter.
class LiveBackend : public Backend {
 public:
  explicit LiveBackend(LiveConfig config, Transport transport = {});

  std::string id() const override;

  /// Startup reachability check (GET {base}/v1/models).
  void probe();

 protected:
  std::string do_chat(const ChatRequest& req) override;
  std::vector<std::vector<double>> do_embed(const std::vector<std::string>& texts) override;

 private:
  HttpResult request_with_retry(const std::string& method, const std::string& path,
                                const std::string& body);

  LiveConfig config_;
  Transport transport_;
  std::string api_key_;
};

}  // namespace summafact
