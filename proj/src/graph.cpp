#include "sdeval/graph.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

#include "sdeval/errors.hpp"

namespace sdeval {

std::string_view to_symbol(Polarity p) noexcept { return p == Polarity::positive ? "+" : "-"; }

Polarity parse_polarity(std::string_view token) {
  if (token == "+") return Polarity::positive;
  if (token == "-") return Polarity::negative;
  throw SchemaError("polarity must be \"+\" or \"-\", got \"" + std::string(token) + "\"");
}

std::string_view to_string(LoopPolarity p) noexcept {
  return p == LoopPolarity::reinforcing ? "reinforcing" : "balancing";
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view raw) {
  auto begin = raw.begin();
  auto end = raw.end();
  while (begin != end && is_space(*begin)) ++begin;
  while (end != begin && is_space(*(end - 1))) --end;
  return std::string(begin, end);
}

}  // namespace

std::string normalize_name(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (out.empty()) throw InvalidNameError("variable name is empty after trimming");
  return out;
}

std::string display(std::string_view from, std::string_view to, Polarity polarity) {
  std::string out;
  out.reserve(from.size() + to.size() + 10);
  out.append(from).append(" --> (").append(to_symbol(polarity)).append(") ").append(to);
  return out;
}

std::string display(const Relationship& r) { return display(r.from, r.to, r.polarity); }

bool CausalMap::has_variable(std::string_view canonical) const {
  return labels_.find(canonical) != labels_.end();
}

const Relationship* CausalMap::find(std::string_view from, std::string_view to) const {
  auto it = edge_index_.find({std::string(from), std::string(to)});
  return it == edge_index_.end() ? nullptr : &relationships_[it->second];
}

const std::string& CausalMap::label(const std::string& canonical) const {
  auto it = labels_.find(canonical);
  return it == labels_.end() ? canonical : it->second;
}

std::string CausalMap::describe(const Relationship& r) const {
  return display(label(r.from), label(r.to), r.polarity);
}

bool CausalMap::acyclic_edges() const {
  return std::none_of(relationships_.begin(), relationships_.end(),
                      [](const Relationship& r) { return r.from == r.to; });
}

CausalMapBuilder::CausalMapBuilder(CausalMap seed) : map_(std::move(seed)) {}

std::string CausalMapBuilder::variable(std::string_view raw) {
  std::string canonical = normalize_name(raw);
  if (!map_.has_variable(canonical)) {
    map_.labels_.emplace(canonical, trim(raw));
    map_.variables_.push_back(canonical);
  }
  return canonical;
}

CausalMapBuilder& CausalMapBuilder::relationship(std::string_view from, std::string_view to,
                                                 Polarity polarity,
                                                 std::optional<std::string> reasoning) {
  std::string f = normalize_name(from);
  std::string t = normalize_name(to);
  for (auto [canonical, raw] : {std::pair{&f, from}, std::pair{&t, to}}) {
    if (!map_.has_variable(*canonical)) {
      map_.warnings_.push_back("relationship references undeclared variable \"" + trim(raw) +
                               "\"; variable added");
      variable(raw);
    }
  }
  auto key = std::pair{f, t};
  if (auto it = map_.edge_index_.find(key); it != map_.edge_index_.end()) {
    Relationship& existing = map_.relationships_[it->second];
    map_.warnings_.push_back("duplicate relationship " + display(existing) + " merged; keeping " +
                             display(f, t, polarity));
    existing.polarity = polarity;
    existing.reasoning = std::move(reasoning);
    return *this;
  }
  map_.edge_index_.emplace(std::move(key), map_.relationships_.size());
  map_.relationships_.push_back(Relationship{std::move(f), std::move(t), polarity, std::move(reasoning)});
  return *this;
}

void require_ground_truth(const CausalMap& map) {
  for (const auto& r : map.relationships()) {
    if (r.from == r.to) throw GroundTruthError("ground truth contains self-loop on \"" + r.from + "\"");
  }
}

std::vector<std::string> canonical_rotation(std::span<const std::string> cycle) {
  if (cycle.empty()) return {};
  auto smallest = std::min_element(cycle.begin(), cycle.end());
  std::vector<std::string> out(smallest, cycle.end());
  out.insert(out.end(), cycle.begin(), smallest);
  return out;
}

LoopPolarity loop_polarity(std::span<const Polarity> edges) {
  if (edges.empty()) throw InvalidLoopError("a loop needs at least one edge");
  auto negatives = std::count(edges.begin(), edges.end(), Polarity::negative);
  return negatives % 2 == 0 ? LoopPolarity::reinforcing : LoopPolarity::balancing;
}

namespace {

// Johnson's elementary-circuit search. Nodes are indexed in sorted name
// order, so every circuit is discovered from its smallest node and comes out
// already in canonical rotation.
class CycleSearch {
 public:
  CycleSearch(std::size_t n, std::vector<std::vector<std::size_t>> adjacency, std::size_t cap)
      : n_(n), adj_(std::move(adjacency)), cap_(cap), blocked_(n), blocked_by_(n), in_component_(n) {}

  std::vector<std::vector<std::size_t>> run(std::size_t preexisting) {
    found_ = preexisting;
    for (start_ = 0; start_ < n_; ++start_) {
      mark_component_of_start();
      if (!in_component_[start_]) continue;
      for (std::size_t v = 0; v < n_; ++v) {
        blocked_[v] = false;
        blocked_by_[v].clear();
      }
      circuit(start_);
    }
    return std::move(cycles_);
  }

 private:
  // Strongly connected component containing start_ within nodes >= start_.
  // Leaves in_component_ all false when that component is a single node.
  void mark_component_of_start() {
    std::fill(in_component_.begin(), in_component_.end(), false);
    std::vector<bool> forward(n_, false), backward(n_, false);
    reach(start_, forward, false);
    reach(start_, backward, true);
    std::size_t size = 0;
    for (std::size_t v = start_; v < n_; ++v) {
      in_component_[v] = forward[v] && backward[v];
      size += in_component_[v] ? 1 : 0;
    }
    if (size < 2) std::fill(in_component_.begin(), in_component_.end(), false);
  }

  void reach(std::size_t from, std::vector<bool>& seen, bool reverse) {
    if (reverse && reverse_.empty()) {
      reverse_.resize(n_);
      for (std::size_t v = 0; v < n_; ++v)
        for (std::size_t w : adj_[v]) reverse_[w].push_back(v);
    }
    const auto& graph = reverse ? reverse_ : adj_;
    std::vector<std::size_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w : graph[v]) {
        if (w < start_ || seen[w]) continue;
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }

  void unblock(std::size_t u) {
    std::vector<std::size_t> work{u};
    while (!work.empty()) {
      std::size_t x = work.back();
      work.pop_back();
      if (!blocked_[x]) continue;
      blocked_[x] = false;
      for (std::size_t w : blocked_by_[x]) work.push_back(w);
      blocked_by_[x].clear();
    }
  }

  bool circuit(std::size_t v) {
    bool closed = false;
    path_.push_back(v);
    blocked_[v] = true;
    for (std::size_t w : adj_[v]) {
      if (!in_component_[w]) continue;
      if (w == start_) {
        if (++found_ > cap_) throw LoopExplosionError(cap_);
        cycles_.push_back(path_);
        closed = true;
      } else if (!blocked_[w] && circuit(w)) {
        closed = true;
      }
    }
    if (closed) {
      unblock(v);
    } else {
      for (std::size_t w : adj_[v]) {
        if (!in_component_[w]) continue;
        auto& list = blocked_by_[w];
        if (std::find(list.begin(), list.end(), v) == list.end()) list.push_back(v);
      }
    }
    path_.pop_back();
    return closed;
  }

  std::size_t n_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::vector<std::size_t>> reverse_;
  std::size_t cap_;
  std::size_t start_ = 0;
  std::size_t found_ = 0;
  std::vector<bool> blocked_;
  std::vector<std::vector<std::size_t>> blocked_by_;
  std::vector<bool> in_component_;
  std::vector<std::size_t> path_;
  std::vector<std::vector<std::size_t>> cycles_;
};

}  // namespace

std::vector<FeedbackLoop> enumerate_loops(const CausalMap& map, std::size_t cap) {
  std::vector<std::string> names = map.variables();
  std::sort(names.begin(), names.end());
  auto index_of = [&](const std::string& name) {
    return static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), name) - names.begin());
  };

  std::vector<std::vector<std::size_t>> adjacency(names.size());
  std::vector<std::size_t> self_loops;
  for (const auto& r : map.relationships()) {
    std::size_t from = index_of(r.from);
    std::size_t to = index_of(r.to);
    if (from == to) {
      self_loops.push_back(from);
    } else {
      adjacency[from].push_back(to);
    }
  }
  for (auto& targets : adjacency) std::sort(targets.begin(), targets.end());
  if (self_loops.size() > cap) throw LoopExplosionError(cap);

  auto cycles = CycleSearch(names.size(), std::move(adjacency), cap).run(self_loops.size());
  for (std::size_t v : self_loops) cycles.push_back({v});

  std::vector<FeedbackLoop> loops;
  loops.reserve(cycles.size());
  for (const auto& cycle : cycles) {
    FeedbackLoop loop;
    std::vector<Polarity> signs;
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      const auto& from = names[cycle[i]];
      const auto& to = names[cycle[(i + 1) % cycle.size()]];
      loop.nodes.push_back(from);
      signs.push_back(map.find(from, to)->polarity);
    }
    loop.polarity = loop_polarity(signs);
    loops.push_back(std::move(loop));
  }
  std::sort(loops.begin(), loops.end());
  return loops;
}

MapDiff diff_maps(const CausalMap& candidate, const CausalMap& truth) {
  MapDiff diff;
  for (const auto& r : candidate.relationships()) {
    const Relationship* match = truth.find(r.from, r.to);
    if (match == nullptr) {
      diff.fake.push_back(r);
    } else if (match->polarity != r.polarity) {
      diff.polarity_mismatches.push_back({r.from, r.to, match->polarity, r.polarity});
    }
  }
  for (const auto& r : truth.relationships()) {
    if (candidate.find(r.from, r.to) == nullptr) diff.missing.push_back(r);
  }
  auto by_pair = [](const auto& a, const auto& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); };
  std::sort(diff.fake.begin(), diff.fake.end(), by_pair);
  std::sort(diff.missing.begin(), diff.missing.end(), by_pair);
  std::sort(diff.polarity_mismatches.begin(), diff.polarity_mismatches.end(), by_pair);
  return diff;
}

nlohmann::json to_wire(const CausalMap& map) {
  nlohmann::json variables = nlohmann::json::array();
  for (const auto& v : map.variables()) variables.push_back({{"name", map.label(v)}});
  nlohmann::json relationships = nlohmann::json::array();
  for (const auto& r : map.relationships()) {
    nlohmann::json rel = {{"from", map.label(r.from)}, {"to", map.label(r.to)}, {"polarity", to_symbol(r.polarity)}};
    if (r.reasoning) rel["reasoning"] = *r.reasoning;
    relationships.push_back(std::move(rel));
  }
  return {{"variables", std::move(variables)}, {"relationships", std::move(relationships)}};
}

namespace {

const std::string& require_string(const nlohmann::json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw SchemaError(std::string(where) + " needs a string \"" + key + "\" field");
  return it->get_ref<const std::string&>();
}

const nlohmann::json* optional_array(const nlohmann::json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return nullptr;
  if (!it->is_array()) throw SchemaError(std::string("\"") + key + "\" must be an array");
  return &*it;
}

}  // namespace

CausalMap from_wire(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("causal map must be a JSON object");
  CausalMapBuilder builder;
  try {
    if (const auto* variables = optional_array(doc, "variables")) {
      for (const auto& v : *variables) {
        if (!v.is_object()) throw SchemaError("variable entries must be objects");
        builder.variable(require_string(v, "name", "variable"));
      }
    }
    if (const auto* relationships = optional_array(doc, "relationships")) {
      for (const auto& r : *relationships) {
        if (!r.is_object()) throw SchemaError("relationship entries must be objects");
        const auto& from = require_string(r, "from", "relationship");
        const auto& to = require_string(r, "to", "relationship");
        Polarity polarity = parse_polarity(require_string(r, "polarity", "relationship"));
        std::optional<std::string> reasoning;
        if (auto it = r.find("reasoning"); it != r.end() && !it->is_null()) {
          if (!it->is_string()) throw SchemaError("relationship \"reasoning\" must be a string");
          reasoning = it->get<std::string>();
        }
        builder.relationship(from, to, polarity, std::move(reasoning));
      }
    }
  } catch (const InvalidNameError& e) {
    throw SchemaError(e.what());
  }
  return std::move(builder).build();
}

}  // namespace sdeval
