#include "sdeval/evaluation.hpp"

#include <algorithm>
#include <set>

#include "sdeval/errors.hpp"

namespace sdeval {

std::string_view to_string(Suite s) noexcept { return s == Suite::causal ? "causal" : "conformance"; }

Suite parse_suite(std::string_view s) {
  if (s == "causal") return Suite::causal;
  if (s == "conformance") return Suite::conformance;
  throw SchemaError("unknown suite \"" + std::string(s) + "\"");
}

std::string_view suite_label(Suite s) noexcept {
  return s == Suite::causal ? "causal translation testing" : "conformance testing";
}

std::string_view to_string(FindingKind k) noexcept {
  switch (k) {
    case FindingKind::fake_relationships: return "fake_relationships";
    case FindingKind::missing_relationships: return "missing_relationships";
    case FindingKind::incorrect_polarity: return "incorrect_polarity";
    case FindingKind::missing_required_variables: return "missing_required_variables";
    case FindingKind::too_few_variables: return "too_few_variables";
    case FindingKind::too_many_variables: return "too_many_variables";
    case FindingKind::too_few_loops: return "too_few_loops";
    case FindingKind::too_many_loops: return "too_many_loops";
  }
  return "";
}

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string relationship_message(std::string_view heading, const Finding& f) {
  return std::string(heading) + "\n" + join(f.items) + "\nGround Truth\n" + join(f.ground_truth) + ": Expected " +
         std::to_string(f.items.size()) + " to be 0.";
}

std::string count_message(std::string_view heading, std::string_view listing, const Finding& f, bool too_few) {
  return std::string(heading) + ": " + std::string(listing) + ": Expected " + std::to_string(f.observed) + " to be " +
         (too_few ? "greater than or equal " : "less than or equal ") + std::to_string(f.bound) + ".";
}

}  // namespace

std::string render_message(const Finding& f) {
  switch (f.kind) {
    case FindingKind::fake_relationships:
      return relationship_message("Fake relationships found", f);
    case FindingKind::missing_relationships:
      return relationship_message("Real relationships not found", f);
    case FindingKind::incorrect_polarity:
      return "Incorrect polarity discovered: Expected '" + std::string(to_symbol(f.actual.value())) + "' to be '" +
             std::string(to_symbol(f.expected.value())) + "'.";
    case FindingKind::missing_required_variables:
      return "Missing required variables: The variables not found were " + join(f.items) + ": Expected " +
             std::to_string(f.items.size()) + " to be 0.";
    case FindingKind::too_few_variables:
      return count_message("Too few variables", "Variables are: " + join(f.items), f, true);
    case FindingKind::too_many_variables:
      return count_message("Too many variables", "Variables are: " + join(f.items), f, false);
    case FindingKind::too_few_loops:
      return count_message("Too few feedback loops",
                           "The number of feedback loops found was " + std::to_string(f.observed), f, true);
    case FindingKind::too_many_loops:
      return count_message("Too many feedback loops",
                           "The number of feedback loops found was " + std::to_string(f.observed), f, false);
  }
  return {};
}

std::string_view to_string(FailureCategory c) noexcept {
  switch (c) {
    case FailureCategory::fake_relationship: return "fake_relationship";
    case FailureCategory::missing_relationship: return "missing_relationship";
    case FailureCategory::polarity: return "polarity";
    case FailureCategory::missing_required_variable: return "missing_required_variable";
    case FailureCategory::too_few_variables: return "too_few_variables";
    case FailureCategory::too_many_variables: return "too_many_variables";
    case FailureCategory::too_few_loops: return "too_few_loops";
    case FailureCategory::too_many_loops: return "too_many_loops";
    case FailureCategory::multiple: return "multiple";
  }
  return "";
}

FailureCategory parse_failure_category(std::string_view s) {
  for (auto c : {FailureCategory::fake_relationship, FailureCategory::missing_relationship, FailureCategory::polarity,
                 FailureCategory::missing_required_variable, FailureCategory::too_few_variables,
                 FailureCategory::too_many_variables, FailureCategory::too_few_loops, FailureCategory::too_many_loops,
                 FailureCategory::multiple})
    if (s == to_string(c)) return c;
  throw SchemaError("unknown failure category \"" + std::string(s) + "\"");
}

std::string_view category_label(FailureCategory c) noexcept {
  switch (c) {
    case FailureCategory::fake_relationship: return "Fake relationship";
    case FailureCategory::missing_relationship: return "Missing relationship";
    case FailureCategory::polarity: return "Polarity";
    case FailureCategory::missing_required_variable: return "Missing required variables";
    case FailureCategory::too_few_variables: return "Too few variables";
    case FailureCategory::too_many_variables: return "Too many variables";
    case FailureCategory::too_few_loops: return "Too few feedback loops";
    case FailureCategory::too_many_loops: return "Too many feedback loops";
    case FailureCategory::multiple: return "Multiple Kinds of Failures";
  }
  return "";
}

EvalOutcome score_causal_translation(const CausalMap& candidate, const GroundTruthCase& gt) {
  const MapDiff diff = diff_maps(candidate, gt.truth);
  EvalOutcome outcome;
  outcome.test_id = gt.id;
  outcome.suite = Suite::causal;

  auto rendered_truth = [&] {
    std::vector<std::string> lines;
    for (const auto& r : gt.truth.relationships()) lines.push_back(gt.truth.describe(r));
    std::sort(lines.begin(), lines.end());
    return lines;
  };
  auto relationship_finding = [&](FindingKind kind, const std::vector<Relationship>& rels, const CausalMap& source) {
    Finding f;
    f.kind = kind;
    for (const auto& r : rels) f.items.push_back(source.describe(r));
    std::sort(f.items.begin(), f.items.end());
    f.ground_truth = rendered_truth();
    f.observed = f.items.size();
    return f;
  };

  if (!diff.fake.empty())
    outcome.findings.push_back(relationship_finding(FindingKind::fake_relationships, diff.fake, candidate));
  if (!diff.missing.empty())
    outcome.findings.push_back(relationship_finding(FindingKind::missing_relationships, diff.missing, gt.truth));
  for (const auto& m : diff.polarity_mismatches) {
    Finding f;
    f.kind = FindingKind::incorrect_polarity;
    f.expected = m.expected;
    f.actual = m.actual;
    f.from = m.from;
    f.to = m.to;
    outcome.findings.push_back(std::move(f));
  }

  outcome.pass = outcome.findings.empty();
  if (!outcome.pass) outcome.category = classify_causal(outcome.findings);
  return outcome;
}

FailureCategory classify_causal(std::span<const Finding> findings) {
  if (findings.empty()) throw ContractViolation("classify_causal called on a passing outcome");
  std::set<FailureCategory> kinds;
  for (const auto& f : findings) {
    switch (f.kind) {
      case FindingKind::fake_relationships: kinds.insert(FailureCategory::fake_relationship); break;
      case FindingKind::missing_relationships: kinds.insert(FailureCategory::missing_relationship); break;
      case FindingKind::incorrect_polarity: kinds.insert(FailureCategory::polarity); break;
      default: throw ContractViolation("conformance finding passed to classify_causal");
    }
  }
  return kinds.size() == 1 ? *kinds.begin() : FailureCategory::multiple;
}

EvalOutcome score_conformance(const CausalMap& candidate, const ConformanceCase& cc, std::size_t loop_cap) {
  const ConformanceConstraint& c = cc.constraint;
  EvalOutcome outcome;
  outcome.test_id = cc.id;
  outcome.suite = Suite::conformance;

  if (!c.required_variables.empty()) {
    Finding f;
    f.kind = FindingKind::missing_required_variables;
    for (const auto& name : c.required_variables) {
      if (!candidate.has_variable(normalize_name(name))) f.items.push_back(name);
    }
    f.observed = f.items.size();
    if (!f.items.empty()) outcome.findings.push_back(std::move(f));
  }

  const std::size_t variable_count = candidate.variables().size();
  auto variable_finding = [&](FindingKind kind, int bound) {
    Finding f;
    f.kind = kind;
    for (const auto& v : candidate.variables()) f.items.push_back(candidate.label(v));
    f.observed = variable_count;
    f.bound = static_cast<std::size_t>(bound);
    outcome.findings.push_back(std::move(f));
  };
  if (c.min_variables && variable_count < static_cast<std::size_t>(*c.min_variables))
    variable_finding(FindingKind::too_few_variables, *c.min_variables);
  if (c.max_variables && variable_count > static_cast<std::size_t>(*c.max_variables))
    variable_finding(FindingKind::too_many_variables, *c.max_variables);

  if (c.min_loops || c.max_loops) {
    const std::size_t loop_count = enumerate_loops(candidate, loop_cap).size();
    auto loop_finding = [&](FindingKind kind, int bound) {
      Finding f;
    f.kind = kind;
      f.observed = loop_count;
      f.bound = static_cast<std::size_t>(bound);
      outcome.findings.push_back(std::move(f));
    };
    if (c.min_loops && loop_count < static_cast<std::size_t>(*c.min_loops))
      loop_finding(FindingKind::too_few_loops, *c.min_loops);
    if (c.max_loops && loop_count > static_cast<std::size_t>(*c.max_loops))
      loop_finding(FindingKind::too_many_loops, *c.max_loops);
  }

  outcome.pass = outcome.findings.empty();
  if (!outcome.pass) outcome.category = classify_conformance(outcome.findings);
  return outcome;
}

FailureCategory classify_conformance(std::span<const Finding> findings) {
  if (findings.empty()) throw ContractViolation("classify_conformance called on a passing outcome");
  std::set<FailureCategory> kinds;
  for (const auto& f : findings) {
    switch (f.kind) {
      case FindingKind::missing_required_variables: kinds.insert(FailureCategory::missing_required_variable); break;
      case FindingKind::too_few_variables: kinds.insert(FailureCategory::too_few_variables); break;
      case FindingKind::too_many_variables: kinds.insert(FailureCategory::too_many_variables); break;
      case FindingKind::too_few_loops: kinds.insert(FailureCategory::too_few_loops); break;
      case FindingKind::too_many_loops: kinds.insert(FailureCategory::too_many_loops); break;
      default: throw ContractViolation("causal finding passed to classify_conformance");
    }
  }
  return kinds.size() == 1 ? *kinds.begin() : FailureCategory::multiple;
}

std::string format_percent(std::size_t passed, std::size_t total) {
  if (total == 0) return "0.0%";
  // Tenths of a percent, rounded half up, in integer arithmetic.
  const std::size_t tenths = (passed * 2000 + total) / (2 * total);
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10) + "%";
}

ScoreCard aggregate(std::span<const EvalOutcome> outcomes) {
  ScoreCard card;
  for (const auto& o : outcomes) {
    auto& passed = o.suite == Suite::causal ? card.causal_passed : card.conformance_passed;
    auto& total = o.suite == Suite::causal ? card.causal_total : card.conformance_total;
    ++total;
    if (o.pass) ++passed;
  }
  return card;
}

nlohmann::json to_json(const Finding& f) {
  nlohmann::json j = {{"kind", to_string(f.kind)}, {"message", render_message(f)}};
  switch (f.kind) {
    case FindingKind::incorrect_polarity:
      j["from"] = f.from;
      j["to"] = f.to;
      j["expected"] = to_symbol(*f.expected);
      j["actual"] = to_symbol(*f.actual);
      break;
    case FindingKind::fake_relationships:
    case FindingKind::missing_relationships:
      j["relationships"] = f.items;
      j["count"] = f.items.size();
      break;
    case FindingKind::missing_required_variables:
      j["variables"] = f.items;
      j["count"] = f.items.size();
      break;
    case FindingKind::too_few_variables:
    case FindingKind::too_many_variables:
      j["variables"] = f.items;
      j["observed"] = f.observed;
      j["bound"] = f.bound;
      break;
    case FindingKind::too_few_loops:
    case FindingKind::too_many_loops:
      j["observed"] = f.observed;
      j["bound"] = f.bound;
      break;
  }
  return j;
}

nlohmann::json to_json(const EvalOutcome& o) {
  nlohmann::json findings = nlohmann::json::array();
  for (const auto& f : o.findings) findings.push_back(to_json(f));
  return {{"test_id", o.test_id},
          {"suite", to_string(o.suite)},
          {"pass", o.pass},
          {"category", o.category ? nlohmann::json(to_string(*o.category)) : nlohmann::json()},
          {"findings", std::move(findings)}};
}

nlohmann::json to_json(const ScoreCard& s) {
  return {{"causal", {{"passed", s.causal_passed}, {"total", s.causal_total}, {"percent", s.causal_percent()}}},
          {"conformance",
           {{"passed", s.conformance_passed}, {"total", s.conformance_total}, {"percent", s.conformance_percent()}}},
          {"overall", {{"passed", s.overall_passed()}, {"total", s.overall_total()}, {"percent", s.overall_percent()}}}};
}

}  // namespace sdeval
