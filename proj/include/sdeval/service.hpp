#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "sdeval/engines.hpp"

namespace sdeval {

struct ApiError {
  int status = 500;
  std::string code;
  std::string message;
};

nlohmann::json to_json(const ApiError& e);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

struct ServiceOptions {
  std::size_t max_body_bytes = 1 << 20;
  // Generation requests that run longer answer 504.
  std::chrono::milliseconds request_timeout{125000};
};

// Request timeout for a provider: its own timeout plus 5s.
ServiceOptions service_options_for(const ProviderConfig& provider);

// Camel-case request body: {prompt, problemStatement?, backgroundKnowledge?,
// currentModel?, parameters?}. Throws SchemaError on a shape violation.
GenerateRequest generate_request_from_json(const nlohmann::json& body);

// {model, supportingInfo?}
nlohmann::json to_json(const GenerateResponse& r);

// Transport-independent request handling.
class Router {
 public:
  explicit Router(std::shared_ptr<const EngineRegistry> registry, ServiceOptions options = {});

  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body) const;

  const ServiceOptions& options() const noexcept { return options_; }

 private:
  ApiResponse generate(std::string_view engine, std::string_view body) const;

  std::shared_ptr<const EngineRegistry> registry_;
  ServiceOptions options_;
};

// Splits "host:port". Throws ConfigError on a malformed address.
std::pair<std::string, int> parse_listen_address(std::string_view addr);

// HTTP front end for a Router.
class Server {
 public:
  explicit Server(std::shared_ptr<const Router> router);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds without serving; port 0 picks a free port. Returns the bound port.
  // Throws ConfigError when the address cannot be bound.
  int bind(const std::string& host, int port);
  // Serves until stop() is called.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sdeval
