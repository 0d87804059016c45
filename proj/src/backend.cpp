#include "summafact/backend.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <regex>

#include <json.hpp>

#include "summafact/errors.hpp"
#include "summafact/filter.hpp"
#include "summafact/util.hpp"

namespace summafact {

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// AuditLog
// ---------------------------------------------------------------------------

AuditLog::AuditLog(const std::filesystem::path& file) : file_(file) {}

void AuditLog::record(AuditEntry entry) {
  std::lock_guard<std::mutex> lock(mu_);
  if (!file_.empty()) {
    nlohmann::json j = {{"ts", entry.ts_ms},
                        {"kind", entry.kind},
                        {"prompt_sha256", entry.prompt_sha256},
                        {"response_sha256", entry.response_sha256},
                        {"latency_ms", entry.latency_ms}};
    std::ofstream out(file_, std::ios::app);
    out << j.dump() << '\n';
  }
  entries_.push_back(std::move(entry));
}

std::vector<AuditEntry> AuditLog::entries() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_;
}

std::size_t AuditLog::count(std::string_view kind) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (kind.empty()) return entries_.size();
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.kind == kind) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// Backend gateway
// ---------------------------------------------------------------------------

class Backend::InflightGate {
 public:
  explicit InflightGate(int slots) : slots_(slots) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return slots_ > 0; });
    --slots_;
  }
  void release() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++slots_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int slots_;
};

namespace {

struct GateHold {
  std::shared_ptr<Backend::InflightGate> gate;
  explicit GateHold(std::shared_ptr<Backend::InflightGate> g) : gate(std::move(g)) {
    if (gate) gate->acquire();
  }
  ~GateHold() {
    if (gate) gate->release();
  }
};

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

void Backend::set_max_inflight(int n) {
  if (n < 1) throw Error(ErrorKind::configuration, "max in-flight requests must be >= 1");
  gate_ = std::make_shared<InflightGate>(n);
}

ChatResponse Backend::chat(const ChatRequest& req) {
  if (req.user.empty()) throw Error(ErrorKind::precondition, "chat prompt must be non-empty");
  if (req.temperature < 0.0 || req.temperature > 2.0)
    throw Error(ErrorKind::precondition, "temperature must lie in [0, 2]");
  if (req.max_tokens < 1) throw Error(ErrorKind::precondition, "max_tokens must be positive");

  GateHold hold(gate_);
  auto t0 = std::chrono::steady_clock::now();
  std::string text = do_chat(req);
  auto t1 = std::chrono::steady_clock::now();
  auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0);

  if (audit_)
    audit_->record({now_ms(), "chat", sha256_hex(req.user), sha256_hex(text), latency.count()});
  return ChatResponse{std::move(text), id(), latency};
}

std::vector<EmbeddingVector> Backend::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(ErrorKind::precondition, "embed requires at least one text");
  for (const auto& t : texts)
    if (t.empty()) throw Error(ErrorKind::precondition, "embed inputs must be non-empty");

  GateHold hold(gate_);
  auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<double>> raw = do_embed(texts);
  auto t1 = std::chrono::steady_clock::now();
  auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0);

  if (raw.size() != texts.size())
    throw Error(ErrorKind::backend, "embedding count does not match input count");

  std::vector<EmbeddingVector> out;
  out.reserve(raw.size());
  for (auto& values : raw) {
    EmbeddingVector v{std::move(values)};
    if (v.values.empty() || v.norm() <= 0.0)
      throw Error(ErrorKind::backend, "backend produced a zero embedding vector");
    out.push_back(std::move(v));
  }
  {
    std::lock_guard<std::mutex> lock(dim_mu_);
    if (run_dim_ == 0) run_dim_ = out.front().dim();
    for (const auto& v : out)
      if (v.dim() != run_dim_)
        throw Error(ErrorKind::backend, "embedding dimension changed within one run");
  }

  if (audit_) {
    std::string joined;
    for (const auto& t : texts) {
      joined += t;
      joined.push_back('\n');
    }
    std::string response_bytes;
    for (const auto& v : out)
      response_bytes.append(reinterpret_cast<const char*>(v.values.data()),
                            v.values.size() * sizeof(double));
    audit_->record(
        {now_ms(), "embed", sha256_hex(joined), sha256_hex(response_bytes), latency.count()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// MockBackend
// ---------------------------------------------------------------------------

struct MockBackend::CompiledRule {
  std::regex pattern;
};

MockBackend::MockBackend(int embedding_dim, std::uint64_t seed, std::vector<MockRule> rules)
    : dim_(embedding_dim), seed_(seed), rules_(std::move(rules)), next_reply_(rules_.size(), 0) {
  if (dim_ < 1) throw Error(ErrorKind::configuration, "embedding_dim must be >= 1");
  compiled_.resize(rules_.size());
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& rule = rules_[i];
    if (rule.match.empty())
      throw Error(ErrorKind::configuration, "mock rule has an empty match pattern");
    if (rule.replies.empty())
      throw Error(ErrorKind::configuration, "mock rule \"" + rule.match + "\" has no replies");
    if (rule.is_regex) {
      try {
        compiled_[i] = std::make_shared<CompiledRule>(CompiledRule{std::regex(rule.match)});
      } catch (const std::regex_error& e) {
        throw Error(ErrorKind::configuration,
                    "mock rule regex \"" + rule.match + "\": " + e.what());
      }
    }
  }
}

std::shared_ptr<MockBackend> MockBackend::from_script(const std::filesystem::path& path,
                                                      std::uint64_t extra_seed) {
  std::string raw;
  try {
    raw = read_file(path.string());
  } catch (const Error& e) {
    throw Error(ErrorKind::configuration, std::string("mock script: ") + e.what());
  }
  nlohmann::json doc = nlohmann::json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw Error(ErrorKind::configuration, "mock script is not a JSON object: " + path.string());
  if (!doc.contains("embedding_dim") || !doc["embedding_dim"].is_number_integer())
    throw Error(ErrorKind::configuration, "mock script missing integer \"embedding_dim\"");

  int dim = doc["embedding_dim"].get<int>();
  std::uint64_t seed = doc.value("seed", std::uint64_t{0});
  std::vector<MockRule> rules;
  for (const auto& r : doc.value("rules", nlohmann::json::array())) {
    if (!r.is_object() || !r.contains("match") || !r["match"].is_string())
      throw Error(ErrorKind::configuration, "mock rule must be an object with a \"match\" string");
    MockRule rule;
    rule.match = r["match"].get<std::string>();
    rule.is_regex = r.value("is_regex", false);
    for (const auto& reply : r.value("replies", nlohmann::json::array())) {
      if (!reply.is_string())
        throw Error(ErrorKind::configuration, "mock rule replies must be strings");
      rule.replies.push_back(reply.get<std::string>());
    }
    rules.push_back(std::move(rule));
  }
  return std::make_shared<MockBackend>(dim, seed ^ extra_seed, std::move(rules));
}

std::string MockBackend::id() const {
  return "mock:dim=" + std::to_string(dim_) + ":seed=" + std::to_string(seed_);
}

std::string MockBackend::do_chat(const ChatRequest& req) {
  std::lock_guard<std::mutex> lock(mu_);
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    const MockRule& rule = rules_[r];
    bool hit = false;
    if (rule.is_regex) {
      hit = std::regex_search(req.user, compiled_[r]->pattern);
    } else {
      hit = req.user.find(rule.match) != std::string::npos;
    }
    if (!hit) continue;
    std::size_t idx = std::min(next_reply_[r], rule.replies.size() - 1);
    ++next_reply_[r];
    return rule.replies[idx];
  }
  std::string head = req.user.substr(0, 64);
  throw Error(ErrorKind::unscripted, "no rule matches prompt starting with \"" + head + "\"");
}

std::vector<double> MockBackend::token_vector(std::string_view token) const {
  std::uint64_t state = fnv1a64(token) ^ (seed_ * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  std::vector<double> v(dim_);
  double norm_sq = 0.0;
  for (int d = 0; d < dim_; ++d) {
    std::uint64_t bits = splitmix64(state);
    // map to [-1, 1)
    double u = static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0);
    v[d] = 2.0 * u - 1.0;
    norm_sq += v[d] * v[d];
  }
  double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) {
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

std::vector<std::vector<double>> MockBackend::do_embed(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    TokenizedText toks = tokenize(text);
    if (toks.normalized.empty())
      throw Error(ErrorKind::backend, "text has no embeddable tokens: \"" + text + "\"");
    std::vector<double> acc(dim_, 0.0);
    for (const auto& tok : toks.normalized) {
      std::vector<double> tv = token_vector(tok);
      for (int d = 0; d < dim_; ++d) acc[d] += tv[d];
    }
    double norm_sq = 0.0;
    for (double x : acc) norm_sq += x * x;
    double norm = std::sqrt(norm_sq);
    if (norm < 1e-12) throw Error(ErrorKind::backend, "token vectors cancelled to zero");
    for (double& x : acc) x /= norm;
    out.push_back(std::move(acc));
  }
  return out;
}

}  // namespace summafact
