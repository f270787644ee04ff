#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sdeval {

enum class Polarity { positive, negative };

// "+" or "-".
std::string_view to_symbol(Polarity p) noexcept;
// Accepts exactly "+" or "-"; anything else throws SchemaError.
Polarity parse_polarity(std::string_view token);
constexpr Polarity flip(Polarity p) noexcept {
  return p == Polarity::positive ? Polarity::negative : Polarity::positive;
}

enum class LoopPolarity { reinforcing, balancing };

std::string_view to_string(LoopPolarity p) noexcept;

// Lowercases, trims, and collapses internal whitespace runs to one space.
// Throws InvalidNameError if nothing is left after trimming.
std::string normalize_name(std::string_view raw);

struct Relationship {
  std::string from;
  std::string to;
  Polarity polarity = Polarity::positive;
  std::optional<std::string> reasoning;

  friend bool operator==(const Relationship&, const Relationship&) = default;
};

// `{from} --> ({polarity}) {to}`
std::string display(std::string_view from, std::string_view to, Polarity polarity);
std::string display(const Relationship& r);

class CausalMapBuilder;

// Directed signed graph of canonical variable names. Relationships are keyed
// by (from, to); polarity is the value. Variables and relationships keep
// their insertion order, and each variable remembers the spelling it was
// first seen with so reports can echo a model's own names.
class CausalMap {
 public:
  CausalMap() = default;

  const std::vector<std::string>& variables() const noexcept { return variables_; }
  const std::vector<Relationship>& relationships() const noexcept { return relationships_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  bool empty() const noexcept { return variables_.empty(); }
  bool has_variable(std::string_view canonical) const;
  const Relationship* find(std::string_view from, std::string_view to) const;

  // Display spelling of a canonical name; the name itself when unknown.
  const std::string& label(const std::string& canonical) const;
  // Relationship rendered with this map's display spellings.
  std::string describe(const Relationship& r) const;

  // True when the map has no self-loops. Ground truths require this.
  bool acyclic_edges() const;

  friend bool operator==(const CausalMap& a, const CausalMap& b) {
    return a.variables_ == b.variables_ && a.relationships_ == b.relationships_;
  }

 private:
  friend class CausalMapBuilder;

  std::vector<std::string> variables_;
  std::vector<Relationship> relationships_;
  std::map<std::string, std::string, std::less<>> labels_;
  std::map<std::pair<std::string, std::string>, std::size_t> edge_index_;
  std::vector<std::string> warnings_;
};

class CausalMapBuilder {
 public:
  CausalMapBuilder() = default;
  explicit CausalMapBuilder(CausalMap seed);

  // Adds a variable; repeated names are ignored. Returns the canonical name.
  std::string variable(std::string_view raw);

  // Adds a relationship, declaring unknown endpoints. A repeated (from, to)
  // pair overwrites the earlier polarity and reasoning and records a warning.
  CausalMapBuilder& relationship(std::string_view from, std::string_view to, Polarity polarity,
                                 std::optional<std::string> reasoning = std::nullopt);

  void warn(std::string message) { map_.warnings_.push_back(std::move(message)); }

  CausalMap build() const& { return map_; }
  CausalMap build() && { return std::move(map_); }

 private:
  CausalMap map_;
};

// Throws GroundTruthError if the map contains a self-loop.
void require_ground_truth(const CausalMap& map);

struct FeedbackLoop {
  // Simple cycle, rotated so the lexicographically smallest node is first.
  std::vector<std::string> nodes;
  LoopPolarity polarity = LoopPolarity::reinforcing;

  friend bool operator==(const FeedbackLoop&, const FeedbackLoop&) = default;
  friend auto operator<=>(const FeedbackLoop& a, const FeedbackLoop& b) { return a.nodes <=> b.nodes; }
};

// Rotates a cycle so its smallest node comes first.
std::vector<std::string> canonical_rotation(std::span<const std::string> cycle);

// Reinforcing iff the number of negative edges is even. Throws
// InvalidLoopError for an empty list.
LoopPolarity loop_polarity(std::span<const Polarity> edges);

inline constexpr std::size_t kDefaultLoopCap = 100000;

// Every simple directed cycle, once each, sorted by canonical rotation.
// Self-loops count as one-node cycles. Throws LoopExplosionError when the
// count would exceed `cap`.
std::vector<FeedbackLoop> enumerate_loops(const CausalMap& map, std::size_t cap = kDefaultLoopCap);

struct PolarityMismatch {
  std::string from;
  std::string to;
  Polarity expected;
  Polarity actual;

  friend bool operator==(const PolarityMismatch&, const PolarityMismatch&) = default;
};

struct MapDiff {
  std::vector<Relationship> fake;     // candidate pairs missing from the truth
  std::vector<Relationship> missing;  // truth pairs missing from the candidate
  std::vector<PolarityMismatch> polarity_mismatches;

  bool empty() const noexcept { return fake.empty() && missing.empty() && polarity_mismatches.empty(); }
};

// Matches on canonical (from, to). All three lists are sorted by (from, to).
MapDiff diff_maps(const CausalMap& candidate, const CausalMap& truth);

// Wire form: {"variables":[{"name":..}],"relationships":[{"from","to","polarity","reasoning"?}]}.
// Names are written with their display spelling.
nlohmann::json to_wire(const CausalMap& map);

// Strict reader for the wire form. Undeclared endpoints are added with a
// warning and duplicate pairs are merged with a warning. Throws SchemaError
// on a shape violation or an unknown polarity token.
CausalMap from_wire(const nlohmann::json& doc);

}  // namespace sdeval
