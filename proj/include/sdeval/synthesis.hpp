#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdeval/graph.hpp"

namespace sdeval {

// Singular gibberish nouns used as variable names. Nouns are lowercase,
// unique, and never end in "s" or "y", so pluralization is a plain suffix.
class GibberishVocabulary {
 public:
  static constexpr std::size_t kSize = 56;

  // Throws VocabularyError when the list breaks an invariant.
  explicit GibberishVocabulary(std::vector<std::string> nouns);

  // The shipped list (data/vocabulary.txt, compiled in).
  static const GibberishVocabulary& builtin();
  // One noun per line; blank lines and '#' comments are skipped.
  static GibberishVocabulary parse(std::string_view text);
  static GibberishVocabulary load(const std::string& path);

  const std::vector<std::string>& nouns() const noexcept { return nouns_; }

  // Draw order for a suite seed. Seed 0 keeps the list order; any other seed
  // draws from a seeded permutation.
  std::vector<std::string> draw_order(std::uint64_t seed) const;

 private:
  std::vector<std::string> nouns_;
};

// noun + "s". Throws VocabularyError for nouns that are empty, not lowercase,
// or already end in "s".
std::string pluralize(std::string_view noun);

enum class Direction { up, down };

std::string_view to_string(Direction d) noexcept;

struct CausalSentenceSpec {
  std::string from;  // singular noun
  std::string to;    // singular noun
  Polarity polarity = Polarity::positive;
  Direction direction = Direction::up;

  friend bool operator==(const CausalSentenceSpec&, const CausalSentenceSpec&) = default;
};

// "The [more|less] <froms> there are, the [more|fewer] <tos> there are."
std::string render_sentence(const CausalSentenceSpec& spec);

// A generated system: the map plus the sentence (with its direction) that
// narrates each relationship.
struct GroundTruthSystem {
  CausalMap truth;
  std::vector<CausalSentenceSpec> sentences;
};

// One simple cycle over the first `length` nouns, in order. Reinforcing loops
// are all positive; balancing loops carry one negative edge, the first one.
// Directions alternate around the cycle, starting "up" on the edge leaving
// the alphabetically smallest variable. Throws InvalidLengthError when
// length < 2 or exceeds the nouns available.
GroundTruthSystem build_loop(std::size_t length, LoopPolarity sign, std::span<const std::string> nouns);
GroundTruthSystem build_loop(std::size_t length, LoopPolarity sign, const GibberishVocabulary& vocab,
                             std::uint64_t seed);

enum class CaseGroup { single_relationship, single_loop, multiple_loops };

std::string_view to_string(CaseGroup g) noexcept;
CaseGroup parse_case_group(std::string_view s);
// Log label: "single relationship", "single feedback loop", "multiple feedback loops".
std::string_view group_label(CaseGroup g) noexcept;

struct GroundTruthCase {
  std::string id;
  CaseGroup group = CaseGroup::single_relationship;
  std::string title;
  std::string description;
  CausalMap truth;
  std::uint64_t seed = 0;
  // Empty for cases loaded from a fixture file.
  std::vector<CausalSentenceSpec> sentences;
};

// One rendered sentence per relationship, joined by single spaces, in an
// order shuffled deterministically by `seed`.
std::string assemble_description(std::span<const CausalSentenceSpec> sentences, std::uint64_t seed);
// Same, with directions re-derived by the loop alternation rule.
std::string assemble_description(const CausalMap& truth, std::uint64_t seed);

std::vector<GroundTruthCase> build_single_relationship_tests(const GibberishVocabulary& vocab, std::uint64_t seed);
std::vector<GroundTruthCase> build_single_loop_tests(const GibberishVocabulary& vocab, std::uint64_t seed);
std::vector<GroundTruthCase> build_multi_loop_tests(const GibberishVocabulary& vocab, std::uint64_t seed);

struct ConformanceConstraint {
  std::vector<std::string> required_variables;
  std::optional<int> min_variables;
  std::optional<int> max_variables;
  std::optional<int> min_loops;
  std::optional<int> max_loops;

  // Throws ContractViolation when nothing is set or a min exceeds its max.
  void validate() const;

  friend bool operator==(const ConformanceConstraint&, const ConformanceConstraint&) = default;
};

// The user-facing instruction sentence for a constraint.
std::string render_instruction(const ConformanceConstraint& c);

// Failure-log description of what a constraint asks for, e.g.
// "can conform to the instruction include a maximum number of variables".
std::string constraint_label(const ConformanceConstraint& c);

nlohmann::json to_json(const ConformanceConstraint& c);
ConformanceConstraint constraint_from_json(const nlohmann::json& j);

enum class ConformanceSubject { american_revolution, road_rage };

std::string_view to_string(ConformanceSubject s) noexcept;
ConformanceSubject parse_conformance_subject(std::string_view s);
std::string_view subject_title(ConformanceSubject s) noexcept;  // "American Revolution"
std::string_view base_prompt(ConformanceSubject s) noexcept;
std::vector<std::string> required_variables(ConformanceSubject s);

struct ConformanceCase {
  std::string id;
  ConformanceSubject case_name = ConformanceSubject::american_revolution;
  std::string base_prompt;
  std::string instruction;
  ConformanceConstraint constraint;
  std::uint64_t seed = 0;

  // base prompt followed by the instruction.
  std::string prompt() const;
  std::string group() const { return constraint_label(constraint); }
  std::string title() const;  // "for the case Road Rage"
};

ConformanceCase make_conformance_case(std::string id, ConformanceSubject subject, ConformanceConstraint constraint,
                                      std::uint64_t seed = 0);

std::vector<ConformanceConstraint> conformance_constraints(ConformanceSubject subject);

struct CanonicalSuites {
  std::vector<GroundTruthCase> causal;
  std::vector<ConformanceCase> conformance;
};

// 24 causal translation cases (4 + 14 + 6) and 18 conformance cases (2 x 9).
CanonicalSuites canonical_suites(std::uint64_t seed = 0);
CanonicalSuites canonical_suites(std::uint64_t seed, const GibberishVocabulary& vocab);

// Fixture file form: a JSON array, causal cases first.
nlohmann::json to_json(const CanonicalSuites& suites);
CanonicalSuites suites_from_json(const nlohmann::json& doc);

}  // namespace sdeval
