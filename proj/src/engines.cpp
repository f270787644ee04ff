#include "sdeval/engines.hpp"

#include <algorithm>

#include "sdeval/errors.hpp"

namespace sdeval {

namespace detail {
extern const std::string_view kBuiltinPrompts;
}

std::string_view to_string(ParameterKind k) noexcept {
  switch (k) {
    case ParameterKind::text: return "text";
    case ParameterKind::integer: return "integer";
    case ParameterKind::boolean: return "boolean";
    case ParameterKind::choice: return "choice";
  }
  return "text";
}

nlohmann::json to_json(const ParameterSpec& p) {
  nlohmann::json j = {{"name", p.name},
                      {"kind", to_string(p.kind)},
                      {"required", p.required},
                      {"default", p.default_value},
                      {"description", p.description}};
  if (p.kind == ParameterKind::choice) j["choices"] = p.choices;
  return j;
}

namespace {

std::string valid_names(std::span<const ParameterSpec> specs) {
  if (specs.empty()) return "none";
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);
  std::sort(names.begin(), names.end());
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

bool type_checks(const ParameterSpec& spec, const nlohmann::json& v) {
  switch (spec.kind) {
    case ParameterKind::text: return v.is_string();
    case ParameterKind::integer: return v.is_number_integer();
    case ParameterKind::boolean: return v.is_boolean();
    case ParameterKind::choice:
      return v.is_string() &&
             std::find(spec.choices.begin(), spec.choices.end(), v.get<std::string>()) != spec.choices.end();
  }
  return false;
}

}  // namespace

ParameterBag resolve_parameters(std::string_view engine, std::span<const ParameterSpec> specs,
                                const ParameterBag& supplied) {
  const std::string where = "engine " + std::string(engine);
  for (const auto& [name, value] : supplied) {
    auto it = std::find_if(specs.begin(), specs.end(), [&](const ParameterSpec& s) { return s.name == name; });
    if (it == specs.end())
      throw ParameterError("unknown parameter \"" + name + "\" for " + where + "; valid parameters: " +
                           valid_names(specs));
    if (!type_checks(*it, value)) {
      std::string expected(to_string(it->kind));
      if (it->kind == ParameterKind::choice) {
        expected = "one of";
        for (const auto& c : it->choices) expected += " \"" + c + "\"";
      }
      throw ParameterError("parameter \"" + name + "\" for " + where + " must be " + expected + ", got " +
                           value.dump());
    }
  }
  ParameterBag out;
  for (const auto& spec : specs) {
    if (auto it = supplied.find(spec.name); it != supplied.end()) {
      out[spec.name] = it->second;
    } else if (spec.required) {
      throw ParameterError("missing required parameter \"" + spec.name + "\" for " + where);
    } else {
      out[spec.name] = spec.default_value;
    }
  }
  return out;
}

// --- registry ---------------------------------------------------------------

void EngineRegistry::add(std::shared_ptr<const Engine> engine) {
  if (!engine) throw ConfigError("cannot register a null engine");
  auto name = engine->name();
  if (!engines_.emplace(name, std::move(engine)).second)
    throw ConfigError("engine \"" + name + "\" is already registered");
}

std::vector<std::string> EngineRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : engines_) out.push_back(name);
  return out;
}

std::shared_ptr<const Engine> EngineRegistry::find(std::string_view name) const {
  auto it = engines_.find(name);
  return it == engines_.end() ? nullptr : it->second;
}

std::shared_ptr<const Engine> EngineRegistry::share(std::string_view name) const {
  if (auto e = find(name)) return e;
  std::string known;
  for (const auto& n : names()) known += (known.empty() ? "" : ", ") + n;
  throw EngineNotFoundError("unknown engine \"" + std::string(name) + "\"; available engines: " +
                            (known.empty() ? "none" : known));
}

const Engine& EngineRegistry::get(std::string_view name) const { return *share(name); }

// --- predprey ---------------------------------------------------------------

std::string PredPreyEngine::description() const {
  return "Dummy engine that always returns the same predator/prey model";
}

GenerateResponse PredPreyEngine::generate(const GenerateRequest&) const {
  CausalMapBuilder b;
  b.variable("predators");
  b.variable("prey");
  b.relationship("predators", "prey", Polarity::negative, "predators eat prey");
  b.relationship("prey", "predators", Polarity::positive, "more prey feeds more predators");
  GenerateResponse r;
  r.map = std::move(b).build();
  r.raw_model_output = to_wire(r.map).dump();
  return r;
}

// --- prompts ----------------------------------------------------------------

PromptSet prompt_set_from_json(const nlohmann::json& doc) {
  try {
    return PromptSet{doc.at("system").get<std::string>(), doc.at("background").get<std::string>(),
                     doc.at("problemStatement").get<std::string>(), doc.at("currentModel").get<std::string>(),
                     doc.at("causalTask").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad prompt set: ") + e.what());
  }
}

const PromptSet& PromptSet::builtin() {
  static const PromptSet prompts = prompt_set_from_json(nlohmann::json::parse(detail::kBuiltinPrompts));
  return prompts;
}

namespace {

std::string substitute(std::string text, std::string_view placeholder, std::string_view value) {
  for (auto pos = text.find(placeholder); pos != std::string::npos;
       pos = text.find(placeholder, pos + value.size()))
    text.replace(pos, placeholder.size(), value);
  return text;
}

bool present(const std::optional<std::string>& s) {
  return s && s->find_first_not_of(" \t\r\n") != std::string::npos;
}

}  // namespace

std::vector<ChatMessage> build_prompt(const GenerateRequest& request, const PromptSet& prompts) {
  std::string system = prompts.system;
  if (present(request.background_knowledge))
    system += "\n\n" + substitute(prompts.background_template, "{backgroundKnowledge}", *request.background_knowledge);
  if (present(request.problem_statement))
    system += "\n\n" + substitute(prompts.problem_template, "{problemStatement}", *request.problem_statement);

  std::vector<ChatMessage> messages{{"system", std::move(system)}};
  if (request.current_map)
    messages.push_back({"assistant", substitute(prompts.current_model_template, "{currentModel}",
                                                to_wire(*request.current_map).dump(2))});
  messages.push_back({"user", request.prompt});
  return messages;
}

nlohmann::json causal_map_response_format() {
  using nlohmann::json;
  json string_type = {{"type", "string"}};
  json variable = {{"type", "object"},
                   {"properties", {{"name", string_type}}},
                   {"required", {"name"}},
                   {"additionalProperties", false}};
  json relationship = {{"type", "object"},
                       {"properties",
                        {{"from", string_type},
                         {"to", string_type},
                         {"polarity", {{"type", "string"}, {"enum", {"+", "-"}}}},
                         {"reasoning", string_type}}},
                       {"required", {"from", "to", "polarity", "reasoning"}},
                       {"additionalProperties", false}};
  json schema = {{"type", "object"},
                 {"properties",
                  {{"variables", {{"type", "array"}, {"items", variable}}},
                   {"relationships", {{"type", "array"}, {"items", relationship}}}}},
                 {"required", {"variables", "relationships"}},
                 {"additionalProperties", false}};
  return {{"type", "json_schema"}, {"json_schema", {{"name", "causal_map"}, {"strict", true}, {"schema", schema}}}};
}

CausalMap parse_structured_map(std::string_view raw) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model output is not valid JSON: ") + e.what());
  }
  return from_wire(doc);
}

// --- LLM engines ------------------------------------------------------------

LlmEngine::LlmEngine(Variant variant, std::shared_ptr<CompletionProvider> provider, ProviderConfig config,
                     PromptSet prompts)
    : variant_(variant), provider_(std::move(provider)), config_(std::move(config)), prompts_(std::move(prompts)) {
  if (!provider_) throw ConfigError("LLM engine needs a completion provider");
}

std::string LlmEngine::name() const { return variant_ == Variant::advanced ? "advanced" : "default"; }

std::string LlmEngine::description() const {
  return variant_ == Variant::advanced
             ? "LLM engine with every prompt segment and the model selection exposed as parameters"
             : "LLM engine with built-in prompts; only the model can be chosen";
}

std::vector<ParameterSpec> LlmEngine::parameters() const {
  std::vector<ParameterSpec> specs{
      {"model", ParameterKind::text, false, config_.model, "Provider model identifier", {}}};
  if (variant_ == Variant::standard) return specs;
  specs.push_back({"reasoningEffort", ParameterKind::choice, false, config_.reasoning_effort.value_or("none"),
                   "Reasoning effort for models that accept it", {"none", "low", "medium", "high"}});
  specs.push_back({"systemPrompt", ParameterKind::text, false, prompts_.system, "System message text", {}});
  specs.push_back({"backgroundPrompt", ParameterKind::text, false, prompts_.background_template,
                   "Background section template; {backgroundKnowledge} is replaced", {}});
  specs.push_back({"problemStatementPrompt", ParameterKind::text, false, prompts_.problem_template,
                   "Problem statement section template; {problemStatement} is replaced", {}});
  specs.push_back({"currentModelPrompt", ParameterKind::text, false, prompts_.current_model_template,
                   "Assistant message template; {currentModel} is replaced with the current model", {}});
  return specs;
}

ChatRequest LlmEngine::prepare(const GenerateRequest& request) const {
  if (request.prompt.find_first_not_of(" \t\r\n") == std::string::npos)
    throw ParameterError("prompt must not be empty");
  const auto specs = parameters();
  const ParameterBag values = resolve_parameters(name(), specs, request.parameters);

  ChatRequest out;
  out.model = values.at("model").get<std::string>();
  out.response_format = causal_map_response_format();
  PromptSet prompts = prompts_;
  if (variant_ == Variant::advanced) {
    prompts.system = values.at("systemPrompt").get<std::string>();
    prompts.background_template = values.at("backgroundPrompt").get<std::string>();
    prompts.problem_template = values.at("problemStatementPrompt").get<std::string>();
    prompts.current_model_template = values.at("currentModelPrompt").get<std::string>();
    if (auto effort = values.at("reasoningEffort").get<std::string>(); effort != "none") out.reasoning_effort = effort;
  } else {
    out.reasoning_effort = config_.reasoning_effort;
  }
  out.messages = build_prompt(request, prompts);
  return out;
}

GenerateResponse LlmEngine::generate(const GenerateRequest& request) const {
  const ChatRequest chat = prepare(request);
  const auto start = std::chrono::steady_clock::now();
  ChatResult result = provider_->complete(chat);
  GenerateResponse out;
  out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  out.map = parse_structured_map(result.content);
  out.raw_model_output = std::move(result.content);
  out.usage = result.usage;
  return out;
}

EngineRegistry make_default_registry(std::shared_ptr<CompletionProvider> provider, const ProviderConfig& config) {
  EngineRegistry registry;
  registry.add(std::make_shared<PredPreyEngine>());
  registry.add(std::make_shared<LlmEngine>(LlmEngine::Variant::standard, provider, config));
  registry.add(std::make_shared<LlmEngine>(LlmEngine::Variant::advanced, provider, config));
  return registry;
}

}  // namespace sdeval
