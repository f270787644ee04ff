#include "sdeval/synthesis.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "sdeval/errors.hpp"
#include "seeded_shuffle.hpp"

namespace sdeval {

namespace detail {
extern const std::string_view kBuiltinVocabulary;
}

// --- vocabulary -------------------------------------------------------------

GibberishVocabulary::GibberishVocabulary(std::vector<std::string> nouns) : nouns_(std::move(nouns)) {
  if (nouns_.size() != kSize)
    throw VocabularyError("vocabulary needs exactly " + std::to_string(kSize) + " nouns, got " +
                          std::to_string(nouns_.size()));
  std::set<std::string> seen;
  for (const auto& noun : nouns_) {
    pluralize(noun);
    if (noun.back() == 'y') throw VocabularyError("noun \"" + noun + "\" ends in \"y\"");
    if (!seen.insert(noun).second) throw VocabularyError("duplicate noun \"" + noun + "\"");
  }
}

GibberishVocabulary GibberishVocabulary::parse(std::string_view text) {
  std::vector<std::string> nouns;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto last = line.find_last_not_of(" \t\r");
    nouns.push_back(line.substr(first, last - first + 1));
  }
  return GibberishVocabulary(std::move(nouns));
}

GibberishVocabulary GibberishVocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read vocabulary file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

const GibberishVocabulary& GibberishVocabulary::builtin() {
  static const GibberishVocabulary vocab = parse(detail::kBuiltinVocabulary);
  return vocab;
}

std::vector<std::string> GibberishVocabulary::draw_order(std::uint64_t seed) const {
  std::vector<std::string> order = nouns_;
  if (seed != 0) detail::seeded_shuffle(order, seed);
  return order;
}

std::string pluralize(std::string_view noun) {
  if (noun.empty()) throw VocabularyError("empty noun");
  if (std::any_of(noun.begin(), noun.end(), [](char c) { return c >= 'A' && c <= 'Z'; }))
    throw VocabularyError("noun \"" + std::string(noun) + "\" is not lowercase");
  if (noun.back() == 's') throw VocabularyError("noun \"" + std::string(noun) + "\" is already plural");
  return std::string(noun) + "s";
}

// --- sentences --------------------------------------------------------------

std::string_view to_string(Direction d) noexcept { return d == Direction::up ? "up" : "down"; }

std::string render_sentence(const CausalSentenceSpec& spec) {
  const bool up = spec.direction == Direction::up;
  // The effect moves with the cause for "+", against it for "-".
  const bool effect_rises = up == (spec.polarity == Polarity::positive);
  std::string out = "The ";
  out += up ? "more " : "less ";
  out += pluralize(spec.from);
  out += " there are, the ";
  out += effect_rises ? "more " : "fewer ";
  out += pluralize(spec.to);
  out += " there are.";
  return out;
}

namespace {

// Directions for the edges of one cycle (edge i leaves cycle[i]), alternating
// from the edge that leaves the alphabetically smallest node.
std::vector<Direction> alternate_directions(std::span<const std::string> plural_cycle) {
  const auto n = plural_cycle.size();
  const auto start = static_cast<std::size_t>(
      std::min_element(plural_cycle.begin(), plural_cycle.end()) - plural_cycle.begin());
  std::vector<Direction> out(n);
  for (std::size_t k = 0; k < n; ++k)
    out[(start + k) % n] = k % 2 == 0 ? Direction::up : Direction::down;
  return out;
}

struct LoopPlan {
  std::size_t length;
  LoopPolarity sign;
};

// Appends the cycle `nodes[0] -> nodes[1] -> ... -> nodes[0]` to `system`.
void append_cycle(GroundTruthSystem& system, CausalMapBuilder& builder, std::span<const std::string> nodes,
                  LoopPolarity sign) {
  std::vector<std::string> plurals;
  for (const auto& n : nodes) plurals.push_back(pluralize(n));
  auto directions = alternate_directions(plurals);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& from = nodes[i];
    const auto& to = nodes[(i + 1) % nodes.size()];
    Polarity p = (i == 0 && sign == LoopPolarity::balancing) ? Polarity::negative : Polarity::positive;
    builder.relationship(pluralize(from), pluralize(to), p);
    system.sentences.push_back({from, to, p, directions[i]});
  }
}

// Loops chained through shared variables: each loop after the first starts at
// the last variable introduced by the loop before it.
GroundTruthSystem build_loop_chain(std::span<const LoopPlan> plans, std::span<const std::string> nouns) {
  GroundTruthSystem system;
  CausalMapBuilder builder;
  std::size_t next = 0;
  std::optional<std::string> hub;
  for (const auto& plan : plans) {
    if (plan.length < 2) throw InvalidLengthError("loop length must be at least 2");
    std::vector<std::string> cycle;
    if (hub) cycle.push_back(*hub);
    while (cycle.size() < plan.length) {
      if (next >= nouns.size())
        throw InvalidLengthError("not enough nouns for a loop of length " + std::to_string(plan.length));
      cycle.push_back(nouns[next++]);
    }
    for (const auto& n : cycle) builder.variable(pluralize(n));
    append_cycle(system, builder, cycle, plan.sign);
    hub = cycle.back();
  }
  system.truth = std::move(builder).build();
  require_ground_truth(system.truth);
  return system;
}

std::string sign_list(std::span<const LoopPlan> plans) {
  std::string out = "[";
  for (std::size_t i = 0; i < plans.size(); ++i) {
    if (i) out += ", ";
    out += plans[i].sign == LoopPolarity::reinforcing ? "+" : "-";
  }
  return out + "]";
}

std::uint64_t case_seed(std::uint64_t suite_seed, std::uint64_t ordinal) { return suite_seed * 100 + ordinal; }

std::string padded_id(std::string_view prefix, std::size_t n) {
  std::string digits = std::to_string(n);
  if (digits.size() < 2) digits.insert(0, "0");
  return std::string(prefix) + "-" + digits;
}

GroundTruthCase make_case(std::size_t ordinal, CaseGroup group, std::string title, GroundTruthSystem system,
                          std::uint64_t suite_seed) {
  GroundTruthCase c;
  c.id = padded_id("causal", ordinal);
  c.group = group;
  c.title = std::move(title);
  c.seed = case_seed(suite_seed, ordinal);
  c.truth = std::move(system.truth);
  c.sentences = std::move(system.sentences);
  c.description = assemble_description(c.sentences, c.seed);
  return c;
}

}  // namespace

GroundTruthSystem build_loop(std::size_t length, LoopPolarity sign, std::span<const std::string> nouns) {
  if (length < 2) throw InvalidLengthError("loop length must be at least 2, got " + std::to_string(length));
  if (length > nouns.size())
    throw InvalidLengthError("loop length " + std::to_string(length) + " exceeds the " +
                             std::to_string(nouns.size()) + " nouns available");
  LoopPlan plan{length, sign};
  return build_loop_chain(std::span(&plan, 1), nouns);
}

GroundTruthSystem build_loop(std::size_t length, LoopPolarity sign, const GibberishVocabulary& vocab,
                             std::uint64_t seed) {
  auto nouns = vocab.draw_order(seed);
  return build_loop(length, sign, nouns);
}

std::string assemble_description(std::span<const CausalSentenceSpec> sentences, std::uint64_t seed) {
  std::vector<std::string> rendered;
  rendered.reserve(sentences.size());
  for (const auto& s : sentences) rendered.push_back(render_sentence(s));
  detail::seeded_shuffle(rendered, seed);
  std::string out;
  for (const auto& s : rendered) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

std::string assemble_description(const CausalMap& truth, std::uint64_t seed) {
  if (truth.relationships().empty()) throw ContractViolation("cannot describe an empty ground truth");
  auto singular = [](const std::string& plural) {
    if (plural.size() < 2 || plural.back() != 's')
      throw VocabularyError("ground truth variable \"" + plural + "\" is not a pluralized noun");
    return plural.substr(0, plural.size() - 1);
  };
  std::map<std::pair<std::string, std::string>, Direction> directions;
  for (const auto& loop : enumerate_loops(truth)) {
    auto dirs = alternate_directions(loop.nodes);
    for (std::size_t i = 0; i < loop.nodes.size(); ++i)
      directions.emplace(std::pair{loop.nodes[i], loop.nodes[(i + 1) % loop.nodes.size()]}, dirs[i]);
  }
  std::vector<CausalSentenceSpec> sentences;
  for (const auto& r : truth.relationships()) {
    auto it = directions.find({r.from, r.to});
    sentences.push_back({singular(r.from), singular(r.to), r.polarity,
                         it == directions.end() ? Direction::up : it->second});
  }
  return assemble_description(sentences, seed);
}

// --- causal translation suites ---------------------------------------------

std::string_view to_string(CaseGroup g) noexcept {
  switch (g) {
    case CaseGroup::single_relationship: return "single_relationship";
    case CaseGroup::single_loop: return "single_loop";
    case CaseGroup::multiple_loops: return "multiple_loops";
  }
  return "";
}

CaseGroup parse_case_group(std::string_view s) {
  for (auto g : {CaseGroup::single_relationship, CaseGroup::single_loop, CaseGroup::multiple_loops})
    if (s == to_string(g)) return g;
  throw SchemaError("unknown case group \"" + std::string(s) + "\"");
}

std::string_view group_label(CaseGroup g) noexcept {
  switch (g) {
    case CaseGroup::single_relationship: return "single relationship";
    case CaseGroup::single_loop: return "single feedback loop";
    case CaseGroup::multiple_loops: return "multiple feedback loops";
  }
  return "";
}

std::vector<GroundTruthCase> build_single_relationship_tests(const GibberishVocabulary& vocab, std::uint64_t seed) {
  auto nouns = vocab.draw_order(seed);
  std::vector<GroundTruthCase> cases;
  std::size_t ordinal = 1;
  for (Polarity p : {Polarity::positive, Polarity::negative}) {
    for (Direction d : {Direction::up, Direction::down}) {
      GroundTruthSystem system;
      CausalSentenceSpec spec{nouns[0], nouns[1], p, d};
      CausalMapBuilder builder;
      builder.variable(pluralize(spec.from));
      builder.variable(pluralize(spec.to));
      system.truth = std::move(builder.relationship(pluralize(spec.from), pluralize(spec.to), p)).build();
      system.sentences.push_back(spec);
      std::string title = std::string("extract a ") + (p == Polarity::positive ? "reinforcing" : "balancing") +
                          " relationship " + std::string(to_string(d));
      cases.push_back(make_case(ordinal++, CaseGroup::single_relationship, std::move(title), std::move(system), seed));
    }
  }
  return cases;
}

std::vector<GroundTruthCase> build_single_loop_tests(const GibberishVocabulary& vocab, std::uint64_t seed) {
  auto nouns = vocab.draw_order(seed);
  std::vector<GroundTruthCase> cases;
  std::size_t ordinal = 5;
  for (LoopPolarity sign : {LoopPolarity::reinforcing, LoopPolarity::balancing}) {
    for (std::size_t length = 2; length <= 8; ++length) {
      // A loop of length n takes nouns n .. 2n-1.
      auto window = std::span<const std::string>(nouns).subspan(length, length);
      std::string title = "extract a " + std::string(to_string(sign)) + " feedback loop with " +
                          std::to_string(length) + " variables";
      cases.push_back(make_case(ordinal++, CaseGroup::single_loop, std::move(title),
                                build_loop(length, sign, window), seed));
    }
  }
  return cases;
}

std::vector<GroundTruthCase> build_multi_loop_tests(const GibberishVocabulary& vocab, std::uint64_t seed) {
  constexpr auto R = LoopPolarity::reinforcing;
  constexpr auto B = LoopPolarity::balancing;
  const std::vector<std::vector<LoopPlan>> layouts = {
      {{3, R}, {6, R}},
      {{3, B}, {6, R}},
      {{5, B}, {2, B}, {4, R}},
      {{5, R}, {2, R}, {4, B}},
      {{3, B}, {5, R}, {6, R}, {2, B}, {6, B}},
      {{3, B}, {5, R}, {6, R}, {2, R}, {6, B}},
  };
  auto nouns = vocab.draw_order(seed);
  std::vector<GroundTruthCase> cases;
  std::size_t ordinal = 19;
  for (const auto& layout : layouts) {
    std::string title = "extract " + std::to_string(layout.size()) + " feedback loops with " + sign_list(layout) +
                        " polarities";
    cases.push_back(make_case(ordinal++, CaseGroup::multiple_loops, std::move(title),
                              build_loop_chain(layout, nouns), seed));
  }
  return cases;
}

// --- conformance ------------------------------------------------------------

void ConformanceConstraint::validate() const {
  if (required_variables.empty() && !min_variables && !max_variables && !min_loops && !max_loops)
    throw ContractViolation("conformance constraint sets nothing");
  if (min_variables && max_variables && *min_variables > *max_variables)
    throw ContractViolation("min_variables exceeds max_variables");
  if (min_loops && max_loops && *min_loops > *max_loops) throw ContractViolation("min_loops exceeds max_loops");
  for (auto bound : {min_variables, max_variables, min_loops, max_loops})
    if (bound && *bound < 0) throw ContractViolation("conformance bounds must be non-negative");
}

namespace {

std::string bound_clause(const std::optional<int>& min, const std::optional<int>& max, std::string_view noun) {
  std::string out;
  if (min) out += "at least " + std::to_string(*min) + " " + std::string(noun);
  if (min && max) out += " and ";
  if (max) out += "no more than " + std::to_string(*max) + " " + std::string(noun);
  return out;
}

}  // namespace

std::string render_instruction(const ConformanceConstraint& c) {
  std::string required;
  if (!c.required_variables.empty()) {
    required = "Your response must include the variables ";
    for (std::size_t i = 0; i < c.required_variables.size(); ++i) {
      if (i > 0) required += (i + 1 == c.required_variables.size()) ? " and " : ", ";
      required += "\"" + c.required_variables[i] + "\"";
    }
  }
  std::string loops = bound_clause(c.min_loops, c.max_loops, "feedback loops");
  std::string variables = bound_clause(c.min_variables, c.max_variables, "variables");
  std::string bounds = loops;
  if (!loops.empty() && !variables.empty()) bounds += " and ";
  bounds += variables;
  if (bounds.empty()) return required;
  bounds = "Your response must include " + bounds + ".";
  return required.empty() ? bounds : required + ". " + bounds;
}

std::string constraint_label(const ConformanceConstraint& c) {
  std::string out = "can conform to the instruction include ";
  std::vector<std::string> parts;
  if (!c.required_variables.empty()) parts.emplace_back("specific variables");
  // The published failure log words this one combination as "a min number".
  const bool min_word_short = c.min_loops && c.max_variables && !c.min_variables && !c.max_loops;
  if (c.min_loops) parts.push_back(min_word_short ? "a min number of feedback loops" : "a minimum number of feedback loops");
  if (c.max_loops) parts.emplace_back("a maximum number of feedback loops");
  if (c.min_variables) parts.emplace_back("a minimum number of variables");
  if (c.max_variables) parts.emplace_back("a maximum number of variables");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += " and ";
    out += parts[i];
  }
  return out;
}

nlohmann::json to_json(const ConformanceConstraint& c) {
  nlohmann::json j = {{"required_variables", c.required_variables}};
  auto put = [&](const char* key, const std::optional<int>& v) { j[key] = v ? nlohmann::json(*v) : nlohmann::json(); };
  put("min_variables", c.min_variables);
  put("max_variables", c.max_variables);
  put("min_loops", c.min_loops);
  put("max_loops", c.max_loops);
  return j;
}

ConformanceConstraint constraint_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("constraint must be an object");
  ConformanceConstraint c;
  try {
    if (auto it = j.find("required_variables"); it != j.end() && !it->is_null())
      c.required_variables = it->get<std::vector<std::string>>();
    auto get = [&](const char* key) -> std::optional<int> {
      auto it = j.find(key);
      if (it == j.end() || it->is_null()) return std::nullopt;
      if (!it->is_number_integer()) throw SchemaError(std::string("constraint field ") + key + " must be an integer");
      return it->get<int>();
    };
    c.min_variables = get("min_variables");
    c.max_variables = get("max_variables");
    c.min_loops = get("min_loops");
    c.max_loops = get("max_loops");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad constraint: ") + e.what());
  }
  c.validate();
  return c;
}

std::string_view to_string(ConformanceSubject s) noexcept {
  return s == ConformanceSubject::american_revolution ? "american_revolution" : "road_rage";
}

ConformanceSubject parse_conformance_subject(std::string_view s) {
  if (s == "american_revolution") return ConformanceSubject::american_revolution;
  if (s == "road_rage") return ConformanceSubject::road_rage;
  throw SchemaError("unknown conformance case \"" + std::string(s) + "\"");
}

std::string_view subject_title(ConformanceSubject s) noexcept {
  return s == ConformanceSubject::american_revolution ? "American Revolution" : "Road Rage";
}

std::string_view base_prompt(ConformanceSubject s) noexcept {
  return s == ConformanceSubject::american_revolution
             ? "create a feedback-based explanation for the American revolutionary war"
             : "create a feedback-based explanation for road rage";
}

std::vector<std::string> required_variables(ConformanceSubject s) {
  if (s == ConformanceSubject::american_revolution) return {"Taxation", "Anti-British Sentiment", "Colonial Identity"};
  return {"Traffic Congestion", "Driver Stress", "Accidents"};
}

std::string ConformanceCase::prompt() const { return base_prompt + ". " + instruction; }

std::string ConformanceCase::title() const { return "for the case " + std::string(subject_title(case_name)); }

ConformanceCase make_conformance_case(std::string id, ConformanceSubject subject, ConformanceConstraint constraint,
                                      std::uint64_t seed) {
  constraint.validate();
  ConformanceCase c;
  c.id = std::move(id);
  c.case_name = subject;
  c.base_prompt = std::string(base_prompt(subject));
  c.instruction = render_instruction(constraint);
  c.constraint = std::move(constraint);
  c.seed = seed;
  return c;
}

std::vector<ConformanceConstraint> conformance_constraints(ConformanceSubject subject) {
  auto make = [](std::optional<int> min_vars, std::optional<int> max_vars, std::optional<int> min_loops,
                 std::optional<int> max_loops) {
    ConformanceConstraint c;
    c.min_variables = min_vars;
    c.max_variables = max_vars;
    c.min_loops = min_loops;
    c.max_loops = max_loops;
    return c;
  };
  ConformanceConstraint required;
  required.required_variables = required_variables(subject);
  return {
      required,
      make(10, {}, {}, {}),
      make({}, 5, {}, {}),
      make({}, {}, 8, {}),
      make({}, {}, {}, 4),
      make(8, {}, 6, {}),
      make({}, 15, 6, {}),
      make({}, 5, {}, 4),
      make(5, {}, {}, 4),
  };
}

CanonicalSuites canonical_suites(std::uint64_t seed) { return canonical_suites(seed, GibberishVocabulary::builtin()); }

CanonicalSuites canonical_suites(std::uint64_t seed, const GibberishVocabulary& vocab) {
  CanonicalSuites suites;
  for (auto* build : {&build_single_relationship_tests, &build_single_loop_tests, &build_multi_loop_tests}) {
    auto cases = build(vocab, seed);
    std::move(cases.begin(), cases.end(), std::back_inserter(suites.causal));
  }
  std::size_t ordinal = 1;
  for (auto subject : {ConformanceSubject::american_revolution, ConformanceSubject::road_rage}) {
    for (auto& constraint : conformance_constraints(subject)) {
      suites.conformance.push_back(make_conformance_case(padded_id("conformance", ordinal),
                                                         subject, std::move(constraint), case_seed(seed, ordinal)));
      ++ordinal;
    }
  }
  return suites;
}

nlohmann::json to_json(const CanonicalSuites& suites) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& c : suites.causal) {
    doc.push_back({{"id", c.id},
                   {"suite", "causal"},
                   {"group", to_string(c.group)},
                   {"title", c.title},
                   {"description", c.description},
                   {"truth", to_wire(c.truth)},
                   {"seed", c.seed}});
  }
  for (const auto& c : suites.conformance) {
    doc.push_back({{"id", c.id},
                   {"suite", "conformance"},
                   {"group", c.group()},
                   {"case", to_string(c.case_name)},
                   {"title", c.title()},
                   {"base_prompt", c.base_prompt},
                   {"instruction", c.instruction},
                   {"prompt", c.prompt()},
                   {"constraint", to_json(c.constraint)},
                   {"seed", c.seed}});
  }
  return doc;
}

CanonicalSuites suites_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw SchemaError("suite fixture must be a JSON array");
  CanonicalSuites suites;
  try {
    for (const auto& entry : doc) {
      const std::string suite = entry.at("suite").get<std::string>();
      if (suite == "causal") {
        GroundTruthCase c;
        c.id = entry.at("id").get<std::string>();
        c.group = parse_case_group(entry.at("group").get<std::string>());
        c.title = entry.at("title").get<std::string>();
        c.description = entry.at("description").get<std::string>();
        c.truth = from_wire(entry.at("truth"));
        c.seed = entry.value("seed", std::uint64_t{0});
        require_ground_truth(c.truth);
        suites.causal.push_back(std::move(c));
      } else if (suite == "conformance") {
        auto subject = parse_conformance_subject(entry.at("case").get<std::string>());
        auto c = make_conformance_case(entry.at("id").get<std::string>(), subject,
                                       constraint_from_json(entry.at("constraint")), entry.value("seed", std::uint64_t{0}));
        if (auto it = entry.find("base_prompt"); it != entry.end()) c.base_prompt = it->get<std::string>();
        if (auto it = entry.find("instruction"); it != entry.end()) c.instruction = it->get<std::string>();
        suites.conformance.push_back(std::move(c));
      } else {
        throw SchemaError("unknown suite \"" + suite + "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad suite fixture: ") + e.what());
  }
  return suites;
}

}  // namespace sdeval
