#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace sdeval {

struct RetryPolicy {
  std::chrono::milliseconds base{1000};
  double factor = 2.0;
  // Each delay is scaled by a uniform factor in [1 - jitter, 1 + jitter].
  double jitter = 0.2;
};

struct ProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o";
  // Name of the environment variable holding the API key.
  std::string api_key_env = "SD_EVAL_API_KEY";
  std::chrono::milliseconds timeout{120000};
  int max_retries = 3;
  std::optional<std::string> reasoning_effort;
  RetryPolicy retry;
  std::size_t max_in_flight = 4;

  // Throws ConfigError on a non-positive timeout, negative retry count,
  // unknown reasoning effort, or zero in-flight limit.
  void validate() const;
};

struct ChatMessage {
  std::string role;  // system, assistant or user
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

nlohmann::json to_json(const std::vector<ChatMessage>& messages);
std::vector<ChatMessage> messages_from_json(const nlohmann::json& j);

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  // The `response_format` object sent to the provider.
  nlohmann::json response_format;
  std::optional<std::string> reasoning_effort;

  // Chat-completions request body.
  nlohmann::json to_body() const;
  // Hex SHA-256 of the serialized body. Keys transcripts.
  std::string hash() const;
};

struct Usage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct ChatResult {
  std::string content;        // assistant message content, verbatim
  std::string response_body;  // full provider response
  std::optional<Usage> usage;
};

// Pulls the assistant content and usage out of a chat-completions response.
// Throws ProviderError when the body has no usable message.
ChatResult read_completion(int status, const std::string& body);

class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual ChatResult complete(const ChatRequest& request) = 0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

// Posts a body and returns the status and body. Implementations throw
// TransportError for connection failures and timeouts.
using HttpPost = std::function<HttpResponse(const std::string& url, const std::string& body, const Headers& headers,
                                            std::chrono::milliseconds timeout)>;

HttpPost default_http_post();

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// OpenAI-compatible chat-completions client with retry and an in-flight cap.
class OpenAiClient : public CompletionProvider {
 public:
  explicit OpenAiClient(ProviderConfig config, HttpPost post = default_http_post(), Sleeper sleep = {});

  ChatResult complete(const ChatRequest& request) override;

  // Delay before retry number `attempt` (0-based), before jitter.
  std::chrono::milliseconds backoff(int attempt) const;

  const ProviderConfig& config() const noexcept { return config_; }

 private:
  ProviderConfig config_;
  HttpPost post_;
  Sleeper sleep_;
  std::counting_semaphore<1024> in_flight_;
};

// One provider exchange as stored on disk.
struct Transcript {
  std::string request_hash;
  std::vector<ChatMessage> messages;
  std::string response_body;
  std::string model;
  std::string timestamp;
};

nlohmann::json to_json(const Transcript& t);
Transcript transcript_from_json(const nlohmann::json& j);

// Path of the transcript for a request hash inside `dir`.
std::filesystem::path transcript_path(const std::filesystem::path& dir, const std::string& hash);

// Answers from transcripts only; never touches the network. A request with
// no transcript throws TransportError.
class ReplayProvider : public CompletionProvider {
 public:
  explicit ReplayProvider(std::filesystem::path dir);
  ChatResult complete(const ChatRequest& request) override;

 private:
  std::filesystem::path dir_;
};

// Forwards to another provider and writes a transcript for every exchange.
class RecordingProvider : public CompletionProvider {
 public:
  RecordingProvider(std::shared_ptr<CompletionProvider> inner, std::filesystem::path dir);
  ChatResult complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<CompletionProvider> inner_;
  std::filesystem::path dir_;
};

}  // namespace sdeval
