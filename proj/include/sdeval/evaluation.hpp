#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdeval/graph.hpp"
#include "sdeval/synthesis.hpp"

namespace sdeval {

enum class Suite { causal, conformance };

std::string_view to_string(Suite s) noexcept;
Suite parse_suite(std::string_view s);
// "causal translation testing" / "conformance testing"
std::string_view suite_label(Suite s) noexcept;

enum class FindingKind {
  fake_relationships,
  missing_relationships,
  incorrect_polarity,
  missing_required_variables,
  too_few_variables,
  too_many_variables,
  too_few_loops,
  too_many_loops,
};

std::string_view to_string(FindingKind k) noexcept;

// One scoring observation, carrying exactly what its log message needs.
struct Finding {
  FindingKind kind = FindingKind::fake_relationships;
  // Relationship findings: offending relationships rendered with the map
  // they came from, sorted. Variable-count findings: the candidate's variables
  // in map order. Missing-required findings: the names that were not found.
  std::vector<std::string> items;
  // Relationship findings only: the full ground truth, rendered and sorted.
  std::vector<std::string> ground_truth;
  // Observed count and the bound it was checked against (0 for relationship
  // findings, whose bound is always zero).
  std::size_t observed = 0;
  std::size_t bound = 0;
  // Polarity findings only.
  std::optional<Polarity> expected;
  std::optional<Polarity> actual;
  std::string from;
  std::string to;

  friend bool operator==(const Finding&, const Finding&) = default;
};

// The log message for a finding, in the published failure-log format.
std::string render_message(const Finding& f);

enum class FailureCategory {
  fake_relationship,
  missing_relationship,
  polarity,
  missing_required_variable,
  too_few_variables,
  too_many_variables,
  too_few_loops,
  too_many_loops,
  multiple,
};

std::string_view to_string(FailureCategory c) noexcept;
FailureCategory parse_failure_category(std::string_view s);
// Column heading used in the failure-count tables.
std::string_view category_label(FailureCategory c) noexcept;

inline constexpr std::array kCausalCategories = {
    FailureCategory::fake_relationship, FailureCategory::missing_relationship, FailureCategory::multiple,
    FailureCategory::polarity};
inline constexpr std::array kConformanceCategories = {
    FailureCategory::multiple, FailureCategory::too_few_loops, FailureCategory::too_few_variables,
    FailureCategory::too_many_loops, FailureCategory::too_many_variables,
    FailureCategory::missing_required_variable};

struct EvalOutcome {
  std::string test_id;
  Suite suite = Suite::causal;
  bool pass = true;
  std::vector<Finding> findings;
  std::optional<FailureCategory> category;
};

// Diff-based scoring against the case's ground truth. Findings come out as
// one fake-set entry, one missing-set entry, then one entry per polarity
// mismatch in (from, to) order.
EvalOutcome score_causal_translation(const CausalMap& candidate, const GroundTruthCase& gt);

// Throws ContractViolation on an empty finding list.
FailureCategory classify_causal(std::span<const Finding> findings);

// Checks required variables, then variable count, then loop count.
// LoopExplosionError propagates.
EvalOutcome score_conformance(const CausalMap& candidate, const ConformanceCase& cc,
                              std::size_t loop_cap = kDefaultLoopCap);

// Throws ContractViolation on an empty finding list.
FailureCategory classify_conformance(std::span<const Finding> findings);

// Percent with one decimal, rounded half up: "83.3%". Zero total gives "0.0%".
std::string format_percent(std::size_t passed, std::size_t total);

struct ScoreCard {
  std::size_t causal_passed = 0;
  std::size_t causal_total = 0;
  std::size_t conformance_passed = 0;
  std::size_t conformance_total = 0;

  std::size_t overall_passed() const noexcept { return causal_passed + conformance_passed; }
  std::size_t overall_total() const noexcept { return causal_total + conformance_total; }
  std::string causal_percent() const { return format_percent(causal_passed, causal_total); }
  std::string conformance_percent() const { return format_percent(conformance_passed, conformance_total); }
  std::string overall_percent() const { return format_percent(overall_passed(), overall_total()); }

  friend bool operator==(const ScoreCard&, const ScoreCard&) = default;
};

ScoreCard aggregate(std::span<const EvalOutcome> outcomes);

nlohmann::json to_json(const Finding& f);
nlohmann::json to_json(const EvalOutcome& o);
nlohmann::json to_json(const ScoreCard& s);

}  // namespace sdeval
