#include "sdeval/service.hpp"

#include <charconv>
#include <future>
#include <thread>

#include <httplib.h>

#include "sdeval/errors.hpp"

namespace sdeval {

nlohmann::json to_json(const ApiError& e) {
  return {{"status", e.status}, {"code", e.code}, {"message", e.message}};
}

ServiceOptions service_options_for(const ProviderConfig& provider) {
  ServiceOptions o;
  o.request_timeout = provider.timeout + std::chrono::seconds(5);
  return o;
}

namespace {

ApiResponse error(int status, std::string code, std::string message) {
  return {status, to_json(ApiError{status, std::move(code), std::move(message)})};
}

std::optional<std::string> optional_text(const nlohmann::json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(std::string("\"") + key + "\" must be a string");
  return it->get<std::string>();
}

}  // namespace

GenerateRequest generate_request_from_json(const nlohmann::json& body) {
  if (!body.is_object()) throw SchemaError("request body must be a JSON object");
  GenerateRequest r;
  auto prompt = optional_text(body, "prompt");
  if (!prompt) throw SchemaError("\"prompt\" is required");
  if (prompt->find_first_not_of(" \t\r\n") == std::string::npos) throw SchemaError("\"prompt\" must not be empty");
  r.prompt = std::move(*prompt);
  r.problem_statement = optional_text(body, "problemStatement");
  r.background_knowledge = optional_text(body, "backgroundKnowledge");
  if (auto it = body.find("currentModel"); it != body.end() && !it->is_null()) {
    try {
      r.current_map = from_wire(*it);
    } catch (const InvalidNameError& e) {
      throw SchemaError(std::string("\"currentModel\": ") + e.what());
    }
  }
  if (auto it = body.find("parameters"); it != body.end() && !it->is_null()) {
    if (!it->is_object()) throw SchemaError("\"parameters\" must be an object");
    for (const auto& [k, v] : it->items()) r.parameters[k] = v;
  }
  for (const auto& [k, _] : body.items()) {
    if (k != "prompt" && k != "problemStatement" && k != "backgroundKnowledge" && k != "currentModel" &&
        k != "parameters")
      throw SchemaError("unknown field \"" + k + "\"");
  }
  return r;
}

nlohmann::json to_json(const GenerateResponse& r) {
  nlohmann::json out = {{"model", to_wire(r.map)}};
  nlohmann::json info = nlohmann::json::object();
  if (!r.map.warnings().empty()) info["warnings"] = r.map.warnings();
  if (r.usage) info["usage"] = {{"promptTokens", r.usage->prompt_tokens}, {"completionTokens", r.usage->completion_tokens}};
  if (!info.empty()) out["supportingInfo"] = std::move(info);
  return out;
}

Router::Router(std::shared_ptr<const EngineRegistry> registry, ServiceOptions options)
    : registry_(std::move(registry)), options_(options) {
  if (!registry_) throw ConfigError("router needs an engine registry");
}

ApiResponse Router::handle(std::string_view method, std::string_view path, std::string_view body) const {
  constexpr std::string_view prefix = "/api/v1/engines";
  if (body.size() > options_.max_body_bytes)
    return error(413, "payload_too_large",
                 "request body exceeds " + std::to_string(options_.max_body_bytes) + " bytes");
  if (path.substr(0, prefix.size()) != prefix) return error(404, "not_found", "no route for " + std::string(path));

  auto rest = path.substr(prefix.size());
  auto allow = [&](std::string_view wanted) -> std::optional<ApiResponse> {
    if (method == wanted) return std::nullopt;
    return error(405, "method_not_allowed", std::string(path) + " only accepts " + std::string(wanted));
  };

  if (rest.empty() || rest == "/") {
    if (auto bad = allow("GET")) return *bad;
    nlohmann::json engines = nlohmann::json::array();
    for (const auto& name : registry_->names()) engines.push_back({{"name", name}});
    return {200, {{"engines", engines}}};
  }

  rest.remove_prefix(1);
  const auto slash = rest.find('/');
  const auto name = rest.substr(0, slash);
  const auto action = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash + 1);
  if (name.empty() || (action != "parameters" && action != "generate"))
    return error(404, "not_found", "no route for " + std::string(path));

  if (auto bad = allow(action == "parameters" ? "GET" : "POST")) return *bad;
  if (!registry_->find(name)) {
    std::string known;
    for (const auto& n : registry_->names()) known += (known.empty() ? "" : ", ") + n;
    return error(404, "engine_not_found",
                 "unknown engine \"" + std::string(name) + "\"; available engines: " + (known.empty() ? "none" : known));
  }
  if (action == "parameters") {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : registry_->get(name).parameters()) params.push_back(to_json(p));
    return {200, {{"parameters", params}}};
  }
  return generate(name, body);
}

ApiResponse Router::generate(std::string_view engine_name, std::string_view body) const {
  GenerateRequest request;
  try {
    request = generate_request_from_json(nlohmann::json::parse(body));
  } catch (const nlohmann::json::parse_error& e) {
    return error(400, "bad_request", std::string("body is not valid JSON: ") + e.what());
  } catch (const SchemaError& e) {
    return error(400, "bad_request", e.what());
  }

  auto engine = registry_->share(engine_name);
  auto result = std::make_shared<std::promise<GenerateResponse>>();
  auto future = result->get_future();
  // Detached so a stuck provider call cannot hold the response past the
  // timeout; the worker owns everything it touches.
  std::thread([engine, request = std::move(request), result] {
    try {
      result->set_value(engine->generate(request));
    } catch (...) {
      result->set_exception(std::current_exception());
    }
  }).detach();

  if (future.wait_for(options_.request_timeout) == std::future_status::timeout)
    return error(504, "timeout",
                 "generation did not finish within " + std::to_string(options_.request_timeout.count()) + " ms");
  try {
    return {200, to_json(future.get())};
  } catch (const ParameterError& e) {
    return error(400, "bad_request", e.what());
  } catch (const ParseError& e) {
    return error(502, "malformed_model", e.what());
  } catch (const SchemaError& e) {
    return error(502, "malformed_model", e.what());
  } catch (const InvalidNameError& e) {
    return error(502, "malformed_model", e.what());
  } catch (const ProviderError& e) {
    return error(502, "provider_error", e.what());
  } catch (const TransportError& e) {
    return error(502, "provider_error", e.what());
  } catch (const ConfigError& e) {
    return error(502, "provider_error", e.what());
  } catch (const std::exception& e) {
    return error(500, "internal_error", e.what());
  }
}

std::pair<std::string, int> parse_listen_address(std::string_view addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string_view::npos || colon == 0)
    throw ConfigError("listen address must look like HOST:PORT, got \"" + std::string(addr) + "\"");
  const auto port_text = addr.substr(colon + 1);
  int port = -1;
  auto [end, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || end != port_text.data() + port_text.size() || port < 0 || port > 65535)
    throw ConfigError("bad port in listen address \"" + std::string(addr) + "\"");
  return {std::string(addr.substr(0, colon)), port};
}

// --- HTTP server ------------------------------------------------------------

struct Server::Impl {
  std::shared_ptr<const Router> router;
  httplib::Server http;
};

namespace {

std::string_view default_code(int status) {
  switch (status) {
    case 400: return "bad_request";
    case 404: return "not_found";
    case 405: return "method_not_allowed";
    case 413: return "payload_too_large";
    default: return status >= 500 ? "internal_error" : "bad_request";
  }
}

}  // namespace

Server::Server(std::shared_ptr<const Router> router) : impl_(std::make_unique<Impl>()) {
  impl_->router = std::move(router);
  auto dispatch = [router = impl_->router](const httplib::Request& req, httplib::Response& res) {
    auto out = router->handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  impl_->http.Get(".*", dispatch);
  impl_->http.Post(".*", dispatch);
  impl_->http.Put(".*", dispatch);
  impl_->http.Delete(".*", dispatch);
  impl_->http.Patch(".*", dispatch);
  impl_->http.set_payload_max_length(impl_->router->options().max_body_bytes);
  // Fills in errors raised by httplib itself, such as an oversized body.
  impl_->http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    res.set_content(
        to_json(ApiError{res.status, std::string(default_code(res.status)), httplib::status_message(res.status)})
            .dump(),
        "application/json");
    return httplib::Server::HandlerResponse::Handled;
  });
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void Server::serve() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace sdeval
