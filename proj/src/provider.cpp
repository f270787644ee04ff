#include "sdeval/provider.hpp"

#include <openssl/evp.h>

#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "sdeval/errors.hpp"

namespace sdeval {

void ProviderConfig::validate() const {
  if (timeout.count() <= 0) throw ConfigError("provider timeout must be positive");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (max_in_flight == 0 || max_in_flight > 1024) throw ConfigError("max_in_flight must be between 1 and 1024");
  if (reasoning_effort && *reasoning_effort != "low" && *reasoning_effort != "medium" && *reasoning_effort != "high")
    throw ConfigError("reasoning effort must be low, medium or high, got \"" + *reasoning_effort + "\"");
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0)
    throw ConfigError("base URL must start with http:// or https://, got \"" + base_url + "\"");
}

nlohmann::json to_json(const std::vector<ChatMessage>& messages) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : messages) out.push_back({{"role", m.role}, {"content", m.content}});
  return out;
}

std::vector<ChatMessage> messages_from_json(const nlohmann::json& j) {
  std::vector<ChatMessage> out;
  try {
    for (const auto& m : j) out.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad message list: ") + e.what());
  }
  return out;
}

nlohmann::json ChatRequest::to_body() const {
  nlohmann::json body = {{"model", model}, {"messages", to_json(messages)}};
  if (!response_format.is_null()) body["response_format"] = response_format;
  if (reasoning_effort) body["reasoning_effort"] = *reasoning_effort;
  return body;
}

std::string ChatRequest::hash() const {
  const std::string text = to_body().dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int size = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &size, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < size; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

ChatResult read_completion(int status, const std::string& body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw ProviderError(status, body);
  }
  ChatResult result;
  result.response_body = body;
  try {
    const auto& message = doc.at("choices").at(0).at("message");
    if (auto refusal = message.find("refusal"); refusal != message.end() && refusal->is_string())
      throw ProviderError(status, "model refused: " + refusal->get<std::string>());
    result.content = message.at("content").get<std::string>();
    if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object())
      result.usage = Usage{usage->value("prompt_tokens", 0L), usage->value("completion_tokens", 0L)};
  } catch (const nlohmann::json::exception&) {
    throw ProviderError(status, body);
  }
  return result;
}

HttpPost default_http_post() {
  return [](const std::string& url, const std::string& body, const Headers& headers,
            std::chrono::milliseconds timeout) -> HttpResponse {
    const auto scheme_end = url.find("://");
    const auto path_start = scheme_end == std::string::npos ? std::string::npos : url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    httplib::Client client(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  };
}

namespace {

struct SemaphoreGuard {
  explicit SemaphoreGuard(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;
  std::counting_semaphore<1024>& s_;
};

bool retryable(int status) { return status == 429 || status >= 500; }

ProviderConfig validated(ProviderConfig config) {
  config.validate();
  return config;
}

}  // namespace

OpenAiClient::OpenAiClient(ProviderConfig config, HttpPost post, Sleeper sleep)
    : config_(validated(std::move(config))),
      post_(std::move(post)),
      sleep_(sleep ? std::move(sleep) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      in_flight_(static_cast<std::ptrdiff_t>(config_.max_in_flight)) {}

std::chrono::milliseconds OpenAiClient::backoff(int attempt) const {
  double ms = static_cast<double>(config_.retry.base.count());
  for (int i = 0; i < attempt; ++i) ms *= config_.retry.factor;
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

ChatResult OpenAiClient::complete(const ChatRequest& request) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (!key || !*key) throw ConfigError("API key environment variable " + config_.api_key_env + " is not set");

  const std::string url = config_.base_url + (config_.base_url.ends_with('/') ? "" : "/") + "chat/completions";
  const std::string body = request.to_body().dump();
  const Headers headers = {{"Authorization", std::string("Bearer ") + key}};

  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::string last_error;
  for (int attempt = 0;; ++attempt) {
    try {
      HttpResponse res;
      {
        SemaphoreGuard guard(in_flight_);
        res = post_(url, body, headers, config_.timeout);
      }
      if (res.status >= 200 && res.status < 300) return read_completion(res.status, res.body);
      if (!retryable(res.status)) throw ProviderError(res.status, res.body);
      last_error = "HTTP " + std::to_string(res.status) + ": " + res.body;
    } catch (const TransportError& e) {
      last_error = e.what();
    }
    if (attempt >= config_.max_retries)
      throw TransportError("provider request failed after " + std::to_string(attempt + 1) + " attempt(s): " +
                           last_error);
    auto delay = backoff(attempt);
    if (config_.retry.jitter > 0) {
      std::uniform_real_distribution<double> scale(1.0 - config_.retry.jitter, 1.0 + config_.retry.jitter);
      delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * scale(rng)));
    }
    sleep_(delay);
  }
}

// --- transcripts ------------------------------------------------------------

nlohmann::json to_json(const Transcript& t) {
  return {{"request_hash", t.request_hash},
          {"messages", to_json(t.messages)},
          {"response_body", t.response_body},
          {"model", t.model},
          {"timestamp", t.timestamp}};
}

Transcript transcript_from_json(const nlohmann::json& j) {
  Transcript t;
  try {
    t.request_hash = j.at("request_hash").get<std::string>();
    t.messages = messages_from_json(j.at("messages"));
    t.response_body = j.at("response_body").get<std::string>();
    t.model = j.value("model", "");
    t.timestamp = j.value("timestamp", "");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad transcript: ") + e.what());
  }
  return t;
}

std::filesystem::path transcript_path(const std::filesystem::path& dir, const std::string& hash) {
  return dir / (hash + ".json");
}

ReplayProvider::ReplayProvider(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) throw ConfigError("replay directory " + dir_.string() + " does not exist");
}

ChatResult ReplayProvider::complete(const ChatRequest& request) {
  const std::string hash = request.hash();
  const auto path = transcript_path(dir_, hash);
  std::ifstream in(path);
  if (!in) throw TransportError("no recorded transcript for request " + hash + " in " + dir_.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError("unreadable transcript " + path.string() + ": " + e.what());
  }
  Transcript t = transcript_from_json(doc);
  if (t.request_hash != hash) throw TransportError("transcript " + path.string() + " is for a different request");
  return read_completion(200, t.response_body);
}

RecordingProvider::RecordingProvider(std::shared_ptr<CompletionProvider> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create record directory " + dir_.string() + ": " + ec.message());
}

ChatResult RecordingProvider::complete(const ChatRequest& request) {
  ChatResult result = inner_->complete(request);
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  Transcript t{request.hash(), request.messages, result.response_body, request.model, stamp};
  const auto path = transcript_path(dir_, t.request_hash);
  auto tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp);
    out << to_json(t).dump(2) << '\n';
    if (!out) throw ConfigError("cannot write transcript " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
  return result;
}

}  // namespace sdeval
