#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdeval/graph.hpp"
#include "sdeval/provider.hpp"

namespace sdeval {

enum class ParameterKind { text, integer, boolean, choice };

std::string_view to_string(ParameterKind k) noexcept;

struct ParameterSpec {
  std::string name;
  ParameterKind kind = ParameterKind::text;
  bool required = false;
  nlohmann::json default_value;  // null only when required
  std::string description;
  std::vector<std::string> choices;  // kind == choice
};

nlohmann::json to_json(const ParameterSpec& p);

using ParameterBag = std::map<std::string, nlohmann::json, std::less<>>;

// Checks every supplied value against `specs` and fills in defaults. Throws
// ParameterError naming the valid parameters on an unknown name, a type
// mismatch, or a missing required value.
ParameterBag resolve_parameters(std::string_view engine, std::span<const ParameterSpec> specs,
                                const ParameterBag& supplied);

struct GenerateRequest {
  std::string prompt;
  std::optional<std::string> problem_statement;
  std::optional<std::string> background_knowledge;
  std::optional<CausalMap> current_map;
  ParameterBag parameters;
};

struct GenerateResponse {
  CausalMap map;
  std::string raw_model_output;
  std::optional<Usage> usage;
  std::chrono::milliseconds latency{0};
};

class Engine {
 public:
  virtual ~Engine() = default;
  virtual std::string name() const = 0;
  virtual std::string description() const = 0;
  virtual std::vector<ParameterSpec> parameters() const = 0;
  // Must be safe to call concurrently.
  virtual GenerateResponse generate(const GenerateRequest& request) const = 0;
};

class EngineRegistry {
 public:
  // Throws ConfigError on a duplicate name.
  void add(std::shared_ptr<const Engine> engine);

  std::vector<std::string> names() const;  // sorted
  std::shared_ptr<const Engine> find(std::string_view name) const;
  // Throws EngineNotFoundError listing the registered names.
  const Engine& get(std::string_view name) const;
  std::shared_ptr<const Engine> share(std::string_view name) const;

 private:
  std::map<std::string, std::shared_ptr<const Engine>, std::less<>> engines_;
};

// Always answers predators -(-)-> prey, prey -(+)-> predators.
class PredPreyEngine : public Engine {
 public:
  std::string name() const override { return "predprey"; }
  std::string description() const override;
  std::vector<ParameterSpec> parameters() const override { return {}; }
  GenerateResponse generate(const GenerateRequest& request) const override;
};

// Prompt text segments. Templates substitute {backgroundKnowledge},
// {problemStatement} and {currentModel}.
struct PromptSet {
  std::string system;
  std::string background_template;
  std::string problem_template;
  std::string current_model_template;
  std::string causal_task;  // user prompt for causal-translation tests

  static const PromptSet& builtin();
};

PromptSet prompt_set_from_json(const nlohmann::json& doc);

// System message (plus non-empty background and problem sections), an
// assistant message holding the current map when there is one, then the
// user prompt.
std::vector<ChatMessage> build_prompt(const GenerateRequest& request, const PromptSet& prompts);

// Strict json_schema response format for the wire-form map.
nlohmann::json causal_map_response_format();

// Throws ParseError on malformed JSON and SchemaError on a bad document.
CausalMap parse_structured_map(std::string_view raw);

// LLM-backed engine. The default variant exposes only the model; the
// advanced variant also exposes reasoning effort and every prompt segment.
class LlmEngine : public Engine {
 public:
  enum class Variant { standard, advanced };

  LlmEngine(Variant variant, std::shared_ptr<CompletionProvider> provider, ProviderConfig config,
            PromptSet prompts = PromptSet::builtin());

  std::string name() const override;
  std::string description() const override;
  std::vector<ParameterSpec> parameters() const override;
  GenerateResponse generate(const GenerateRequest& request) const override;

  // The single provider request `generate` would issue.
  ChatRequest prepare(const GenerateRequest& request) const;

 private:
  Variant variant_;
  std::shared_ptr<CompletionProvider> provider_;
  ProviderConfig config_;
  PromptSet prompts_;
};

// predprey, default and advanced sharing one provider.
EngineRegistry make_default_registry(std::shared_ptr<CompletionProvider> provider, const ProviderConfig& config);

}  // namespace sdeval
