#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "summafact/backend.hpp"
#include "summafact/errors.hpp"

namespace summafact {

namespace {

struct ParsedBase {
  std::string authority;    // scheme://host[:port]
  std::string path_prefix;  // optional path part of the base url
};

ParsedBase parse_base_url(const std::string& base) {
  auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorKind::configuration, "base_url must include a scheme: " + base);
  auto path_start = base.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base, ""};
  std::string prefix = base.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base.substr(0, path_start), prefix};
}

std::string body_excerpt(const std::string& body) {
  std::string ex = body.substr(0, 200);
  std::replace(ex.begin(), ex.end(), '\n', ' ');
  return ex;
}

Transport make_http_transport(const std::string& base_url, const std::string& api_key) {
  ParsedBase parsed = parse_base_url(base_url);
  return [parsed, api_key](const std::string& method, const std::string& path,
                           const std::string& body) -> HttpResult {
    httplib::Client client(parsed.authority);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    std::string full_path = parsed.path_prefix + path;
    httplib::Result res = (method == "GET")
                              ? client.Get(full_path, headers)
                              : client.Post(full_path, headers, body, "application/json");
    if (!res) return {false, 0, "", httplib::to_string(res.error())};
    return {true, res->status, res->body, ""};
  };
}

}  // namespace

LiveBackend::LiveBackend(LiveConfig config, Transport transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (config_.base_url.empty())
    throw Error(ErrorKind::configuration, "live backend requires a base_url");
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  if (!transport_) transport_ = make_http_transport(config_.base_url, api_key_);
}

std::string LiveBackend::id() const {
  return "live:" + config_.base_url + ":" + config_.chat_model;
}

HttpResult LiveBackend::request_with_retry(const std::string& method, const std::string& path,
                                           const std::string& body) {
  const int attempts = config_.retry.retries + 1;
  static thread_local std::mt19937 rng(std::random_device{}());
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  HttpResult last;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    last = transport_(method, path, body);
    if (last.ok && last.status < 400) return last;

    bool transient = !last.ok || last.status == 429 || last.status >= 500;
    if (!transient)
      throw Error(ErrorKind::backend, "HTTP " + std::to_string(last.status) + " on " + path +
                                          ": " + body_excerpt(last.body));
    if (attempt == attempts) break;

    double delay = config_.retry.initial_delay_ms *
                   std::pow(config_.retry.backoff_factor, attempt - 1) *
                   (1.0 + config_.retry.jitter * unit(rng));
    std::this_thread::sleep_for(
        std::chrono::milliseconds(std::max<std::int64_t>(0, std::llround(delay))));
  }
  if (!last.ok)
    throw Error(ErrorKind::transport, "request to " + path + " failed after " +
                                          std::to_string(attempts) + " attempts: " + last.error);
  throw Error(ErrorKind::backend, "HTTP " + std::to_string(last.status) + " on " + path +
                                      " after " + std::to_string(attempts) +
                                      " attempts: " + body_excerpt(last.body));
}

void LiveBackend::probe() {
  HttpResult res = request_with_retry("GET", "/v1/models", "");
  if (res.status >= 300)
    throw Error(ErrorKind::backend, "probe returned HTTP " + std::to_string(res.status));
}

std::string LiveBackend::do_chat(const ChatRequest& req) {
  nlohmann::json messages = nlohmann::json::array();
  if (req.system) messages.push_back({{"role", "system"}, {"content", *req.system}});
  messages.push_back({{"role", "user"}, {"content", req.user}});
  nlohmann::json body = {{"model", config_.chat_model},
                         {"messages", messages},
                         {"temperature", req.temperature},
                         {"max_tokens", req.max_tokens}};
  if (req.seed) body["seed"] = *req.seed;

  HttpResult res = request_with_retry("POST", "/v1/chat/completions", body.dump());
  nlohmann::json doc = nlohmann::json::parse(res.body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty() ||
      !doc["choices"][0].contains("message"))
    throw Error(ErrorKind::backend, "malformed chat completion response: " +
                                        body_excerpt(res.body));
  return doc["choices"][0]["message"].value("content", "");
}

std::vector<std::vector<double>> LiveBackend::do_embed(const std::vector<std::string>& texts) {
  nlohmann::json body = {{"model", config_.embed_model}, {"input", texts}};
  HttpResult res = request_with_retry("POST", "/v1/embeddings", body.dump());
  nlohmann::json doc = nlohmann::json::parse(res.body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("data") || !doc["data"].is_array())
    throw Error(ErrorKind::backend, "malformed embeddings response: " + body_excerpt(res.body));

  std::vector<std::vector<double>> out(texts.size());
  std::size_t fallback_index = 0;
  for (const auto& item : doc["data"]) {
    if (!item.contains("embedding") || !item["embedding"].is_array())
      throw Error(ErrorKind::backend, "embeddings response item missing \"embedding\"");
    std::size_t index = item.value("index", fallback_index);
    if (index >= out.size())
      throw Error(ErrorKind::backend, "embeddings response index out of range");
    out[index] = item["embedding"].get<std::vector<double>>();
    ++fallback_index;
  }
  for (const auto& v : out)
    if (v.empty()) throw Error(ErrorKind::backend, "embeddings response is incomplete");
  return out;
}

}  // namespace summafact
