#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "sdeval/errors.hpp"
#include "sdeval/synthesis.hpp"
#include "support/oracles.hpp"

using namespace sdeval;
using sdeval::testing::parse_sentence;
using sdeval::testing::split_sentences;

namespace {

std::vector<std::string> sorted_display(const CausalMap& m) {
  std::vector<std::string> out;
  for (const auto& r : m.relationships()) out.push_back(display(r));
  std::sort(out.begin(), out.end());
  return out;
}

// Undirected connectivity over the variables that sit on some loop.
bool loop_union_connected(const CausalMap& m) {
  auto loops = enumerate_loops(m);
  std::map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> root = [&](const std::string& x) {
    auto it = parent.find(x);
    if (it == parent.end() || it->second == x) return parent[x] = x;
    return it->second = root(it->second);
  };
  for (const auto& l : loops)
    for (std::size_t i = 0; i < l.nodes.size(); ++i) parent[root(l.nodes[i])] = root(l.nodes[(i + 1) % l.nodes.size()]);
  std::set<std::string> roots;
  for (const auto& [k, v] : std::map(parent)) roots.insert(root(k));
  return roots.size() == 1;
}

}  // namespace

TEST(Vocabulary, BuiltinHoldsInvariants) {
  const auto& nouns = GibberishVocabulary::builtin().nouns();
  ASSERT_EQ(nouns.size(), 56u);
  std::set<std::string> unique(nouns.begin(), nouns.end());
  EXPECT_EQ(unique.size(), 56u);
  for (const auto& n : nouns) {
    EXPECT_FALSE(n.empty());
    EXPECT_NE(n.back(), 's') << n;
    for (char c : n) EXPECT_TRUE(c >= 'a' && c <= 'z') << n;
  }
  for (const char* observed : {"frimbulator", "whatajig", "balack", "whoziewhat", "funkado", "maxabizer",
                               "marticatene", "reflupper", "exeminte", "oc", "priarie", "proptimatire", "houtal",
                               "poval", "auspong", "dominitoxing", "outrance", "illigent"})
    EXPECT_TRUE(unique.count(observed)) << observed;
}

TEST(Vocabulary, RejectsBrokenLists) {
  auto nouns = GibberishVocabulary::builtin().nouns();
  auto dup = nouns;
  dup[1] = dup[0];
  EXPECT_THROW(GibberishVocabulary{dup}, VocabularyError);
  auto plural = nouns;
  plural[3] = "widgets";
  EXPECT_THROW(GibberishVocabulary{plural}, VocabularyError);
  auto upper = nouns;
  upper[3] = "Widget";
  EXPECT_THROW(GibberishVocabulary{upper}, VocabularyError);
  nouns.pop_back();
  EXPECT_THROW(GibberishVocabulary{nouns}, VocabularyError);
  EXPECT_THROW(GibberishVocabulary::load("/nonexistent/vocab.txt"), ConfigError);
}

TEST(Vocabulary, ParseSkipsCommentsAndBlanks) {
  std::string text = "# header\n\n";
  for (const auto& n : GibberishVocabulary::builtin().nouns()) text += "  " + n + "\r\n";
  EXPECT_EQ(GibberishVocabulary::parse(text).nouns(), GibberishVocabulary::builtin().nouns());
}

TEST(Vocabulary, DrawOrderIsSeededPermutation) {
  const auto& v = GibberishVocabulary::builtin();
  EXPECT_EQ(v.draw_order(0), v.nouns());
  auto a = v.draw_order(7);
  EXPECT_EQ(a, v.draw_order(7));
  EXPECT_NE(a, v.nouns());
  EXPECT_NE(a, v.draw_order(8));
  std::sort(a.begin(), a.end());
  auto sorted = v.nouns();
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(a, sorted);
}

TEST(Pluralize, AppendsS) {
  EXPECT_EQ(pluralize("frimbulator"), "frimbulators");
  EXPECT_EQ(pluralize("oc"), "ocs");
  EXPECT_EQ(pluralize("balack"), "balacks");
  EXPECT_THROW(pluralize("glass"), VocabularyError);
  EXPECT_THROW(pluralize(""), VocabularyError);
}

TEST(RenderSentence, TemplateByPolarityAndDirection) {
  EXPECT_EQ(render_sentence({"frimbulator", "whatajig", Polarity::positive, Direction::up}),
            "The more frimbulators there are, the more whatajigs there are.");
  EXPECT_EQ(render_sentence({"frimbulator", "whatajig", Polarity::positive, Direction::down}),
            "The less frimbulators there are, the fewer whatajigs there are.");
  EXPECT_EQ(render_sentence({"frimbulator", "whatajig", Polarity::negative, Direction::up}),
            "The more frimbulators there are, the fewer whatajigs there are.");
  EXPECT_EQ(render_sentence({"frimbulator", "whatajig", Polarity::negative, Direction::down}),
            "The less frimbulators there are, the more whatajigs there are.");
}

TEST(RenderSentence, StrictParserInvertsAllFourForms) {
  for (Polarity p : {Polarity::positive, Polarity::negative})
    for (Direction d : {Direction::up, Direction::down}) {
      CausalSentenceSpec spec{"oc", "houtal", p, d};
      EXPECT_EQ(parse_sentence(render_sentence(spec)), spec);
    }
  EXPECT_FALSE(parse_sentence("The more ocs there are, the more houtals there are"));
  EXPECT_FALSE(parse_sentence("The more ocs there are, the less houtals there are."));
}

TEST(SingleRelationship, FourDistinctCases) {
  auto cases = build_single_relationship_tests(GibberishVocabulary::builtin(), 0);
  ASSERT_EQ(cases.size(), 4u);
  EXPECT_EQ(cases[0].title, "extract a reinforcing relationship up");
  EXPECT_EQ(sorted_display(cases[0].truth), std::vector<std::string>{"frimbulators --> (+) whatajigs"});
  EXPECT_EQ(cases[2].title, "extract a balancing relationship up");
  EXPECT_EQ(sorted_display(cases[2].truth), std::vector<std::string>{"frimbulators --> (-) whatajigs"});
  std::set<std::pair<Polarity, Direction>> kinds;
  for (const auto& c : cases) {
    EXPECT_EQ(c.group, CaseGroup::single_relationship);
    EXPECT_EQ(c.truth.variables().size(), 2u);
    ASSERT_EQ(c.truth.relationships().size(), 1u);
    ASSERT_EQ(c.sentences.size(), 1u);
    kinds.insert({c.sentences[0].polarity, c.sentences[0].direction});
    EXPECT_EQ(split_sentences(c.description).size(), 1u);
  }
  EXPECT_EQ(kinds.size(), 4u);
}

TEST(BuildLoop, BalancingHasOneNegativeEdge) {
  std::vector<std::string> nouns{"funkado", "maxabizer", "marticatene", "reflupper"};
  auto sys = build_loop(4, LoopPolarity::balancing, nouns);
  EXPECT_EQ(sorted_display(sys.truth),
            (std::vector<std::string>{"funkados --> (-) maxabizers", "marticatenes --> (+) refluppers",
                                      "maxabizers --> (+) marticatenes", "refluppers --> (+) funkados"}));
  auto loops = enumerate_loops(sys.truth);
  ASSERT_EQ(loops.size(), 1u);
  EXPECT_EQ(loops[0].polarity, LoopPolarity::balancing);
}

TEST(BuildLoop, DirectionsAlternateFromSmallestVariable) {
  std::vector<std::string> nouns{"whoziewhat", "funkado", "maxabizer", "oc"};
  auto sys = build_loop(4, LoopPolarity::reinforcing, nouns);
  // funkados is alphabetically first; its outgoing edge starts "up".
  std::map<std::string, Direction> by_from;
  for (const auto& s : sys.sentences) by_from[s.from] = s.direction;
  EXPECT_EQ(by_from["funkado"], Direction::up);
  EXPECT_EQ(by_from["maxabizer"], Direction::down);
  EXPECT_EQ(by_from["oc"], Direction::up);
  EXPECT_EQ(by_from["whoziewhat"], Direction::down);
}

TEST(BuildLoop, LengthErrors) {
  const auto& v = GibberishVocabulary::builtin();
  EXPECT_THROW(build_loop(1, LoopPolarity::reinforcing, v, 0), InvalidLengthError);
  EXPECT_THROW(build_loop(57, LoopPolarity::reinforcing, v, 0), InvalidLengthError);
  EXPECT_EQ(build_loop(56, LoopPolarity::balancing, v, 3).truth.relationships().size(), 56u);
}

TEST(SingleLoop, FourteenCasesWithMatchingSigns) {
  auto cases = build_single_loop_tests(GibberishVocabulary::builtin(), 0);
  ASSERT_EQ(cases.size(), 14u);
  std::map<LoopPolarity, int> per_sign;
  std::set<std::string> titles;
  for (const auto& c : cases) {
    titles.insert(c.title);
    auto loops = enumerate_loops(c.truth);
    ASSERT_EQ(loops.size(), 1u) << c.title;
    per_sign[loops[0].polarity]++;
    const std::string word(to_string(loops[0].polarity));
    EXPECT_EQ(c.title, "extract a " + word + " feedback loop with " + std::to_string(c.truth.variables().size()) +
                           " variables");
  }
  EXPECT_EQ(per_sign[LoopPolarity::reinforcing], 7);
  EXPECT_EQ(per_sign[LoopPolarity::balancing], 7);
  EXPECT_TRUE(titles.count("extract a reinforcing feedback loop with 8 variables"));
  EXPECT_TRUE(titles.count("extract a reinforcing feedback loop with 2 variables"));
}

TEST(SingleLoop, PublishedGroundTruthsReproduce) {
  auto cases = build_single_loop_tests(GibberishVocabulary::builtin(), 0);
  std::map<std::string, std::vector<std::string>> by_title;
  for (const auto& c : cases) by_title[c.title] = sorted_display(c.truth);
  EXPECT_EQ(by_title["extract a balancing feedback loop with 4 variables"],
            (std::vector<std::string>{"funkados --> (-) maxabizers", "marticatenes --> (+) refluppers",
                                      "maxabizers --> (+) marticatenes", "refluppers --> (+) funkados"}));
  EXPECT_EQ(by_title["extract a balancing feedback loop with 2 variables"],
            (std::vector<std::string>{"balacks --> (-) whoziewhats", "whoziewhats --> (+) balacks"}));
  EXPECT_EQ(by_title["extract a reinforcing feedback loop with 8 variables"],
            (std::vector<std::string>{"auspongs --> (+) dominitoxings", "dominitoxings --> (+) exemintes",
                                      "exemintes --> (+) ocs", "houtals --> (+) povals", "ocs --> (+) proptimatires",
                                      "povals --> (+) auspongs", "priaries --> (+) houtals",
                                      "proptimatires --> (+) priaries"}));
}

TEST(MultiLoop, SixCasesWithDeclaredLoops) {
  auto cases = build_multi_loop_tests(GibberishVocabulary::builtin(), 0);
  ASSERT_EQ(cases.size(), 6u);
  const std::vector<std::vector<std::size_t>> lengths = {{3, 6}, {3, 6}, {5, 2, 4}, {5, 2, 4},
                                                         {3, 5, 6, 2, 6}, {3, 5, 6, 2, 6}};
  const std::vector<std::string> titles = {
      "extract 2 feedback loops with [+, +] polarities",       "extract 2 feedback loops with [-, +] polarities",
      "extract 3 feedback loops with [-, -, +] polarities",    "extract 3 feedback loops with [+, +, -] polarities",
      "extract 5 feedback loops with [-, +, +, -, -] polarities", "extract 5 feedback loops with [-, +, +, +, -] polarities"};
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    EXPECT_EQ(c.title, titles[i]);
    auto loops = enumerate_loops(c.truth);
    ASSERT_EQ(loops.size(), lengths[i].size()) << c.title;
    std::multiset<std::size_t> got, want(lengths[i].begin(), lengths[i].end());
    for (const auto& l : loops) got.insert(l.nodes.size());
    EXPECT_EQ(got, want);
    // Signs in the title, as a multiset, match the enumerated loops.
    std::multiset<LoopPolarity> got_signs, want_signs;
    for (const auto& l : loops) got_signs.insert(l.polarity);
    for (char ch : c.title.substr(c.title.find('[')))
      if (ch == '+' || ch == '-') want_signs.insert(ch == '+' ? LoopPolarity::reinforcing : LoopPolarity::balancing);
    EXPECT_EQ(got_signs, want_signs);
    EXPECT_TRUE(loop_union_connected(c.truth)) << c.title;
  }
}

TEST(MultiLoop, TwoLoopTopologyMatchesPublishedCase) {
  auto cases = build_multi_loop_tests(GibberishVocabulary::builtin(), 0);
  EXPECT_EQ(sorted_display(cases[0].truth),
            (std::vector<std::string>{"balacks --> (+) frimbulators", "balacks --> (+) whoziewhats",
                                      "frimbulators --> (+) whatajigs", "funkados --> (+) maxabizers",
                                      "marticatenes --> (+) refluppers", "maxabizers --> (+) marticatenes",
                                      "refluppers --> (+) balacks", "whatajigs --> (+) balacks",
                                      "whoziewhats --> (+) funkados"}));
}

TEST(Description, BijectionWithTruthForEveryCanonicalCase) {
  auto suites = canonical_suites(0);
  for (const auto& c : suites.causal) {
    auto sentences = split_sentences(c.description);
    ASSERT_EQ(sentences.size(), c.truth.relationships().size()) << c.id;
    CausalMapBuilder b;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& s : sentences) {
      auto spec = parse_sentence(s);
      ASSERT_TRUE(spec) << c.id << ": " << s;
      EXPECT_TRUE(seen.insert({spec->from, spec->to}).second) << "pair narrated twice in " << c.id;
      b.relationship(pluralize(spec->from), pluralize(spec->to), spec->polarity);
    }
    EXPECT_TRUE(diff_maps(std::move(b).build(), c.truth).empty()) << c.id;
  }
}

TEST(Description, DirectionsAlternateAroundEachLoop) {
  auto suites = canonical_suites(0);
  for (const auto& c : suites.causal) {
    if (c.group == CaseGroup::single_relationship) continue;
    std::map<std::pair<std::string, std::string>, Direction> dir;
    for (const auto& s : split_sentences(c.description)) {
      auto spec = parse_sentence(s);
      dir[{pluralize(spec->from), pluralize(spec->to)}] = spec->direction;
    }
    for (const auto& loop : enumerate_loops(c.truth)) {
      for (std::size_t i = 0; i < loop.nodes.size(); ++i) {
        auto d = dir.at({loop.nodes[i], loop.nodes[(i + 1) % loop.nodes.size()]});
        EXPECT_EQ(d, i % 2 == 0 ? Direction::up : Direction::down) << c.id;
      }
    }
  }
}

TEST(Description, RederivedFromTruthMatchesGenerated) {
  // A lone relationship's direction is chosen per case, not implied by the map.
  for (const auto& c : canonical_suites(0).causal) {
    if (c.group == CaseGroup::single_relationship && c.sentences[0].direction == Direction::down) continue;
    EXPECT_EQ(assemble_description(c.truth, c.seed), c.description) << c.id;
  }
  EXPECT_THROW(assemble_description(CausalMap{}, 1), ContractViolation);
}

TEST(Description, SameSeedSameText) {
  auto a = canonical_suites(0).causal;
  auto b = canonical_suites(0).causal;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].description, b[i].description);
  auto sentences = a[20].sentences;
  EXPECT_EQ(assemble_description(sentences, 1), assemble_description(sentences, 1));
  EXPECT_NE(assemble_description(sentences, 1), assemble_description(sentences, 2));
}

TEST(Conformance, InstructionRenderings) {
  ConformanceConstraint req;
  req.required_variables = {"Taxation", "Anti-British Sentiment", "Colonial Identity"};
  EXPECT_EQ(render_instruction(req),
            "Your response must include the variables \"Taxation\", \"Anti-British Sentiment\" and \"Colonial Identity\"");
  ConformanceConstraint c;
  c.min_variables = 10;
  EXPECT_EQ(render_instruction(c), "Your response must include at least 10 variables.");
  c = {};
  c.max_variables = 5;
  EXPECT_EQ(render_instruction(c), "Your response must include no more than 5 variables.");
  c = {};
  c.min_loops = 8;
  EXPECT_EQ(render_instruction(c), "Your response must include at least 8 feedback loops.");
  c = {};
  c.max_loops = 4;
  c.min_variables = 5;
  EXPECT_EQ(render_instruction(c), "Your response must include no more than 4 feedback loops and at least 5 variables.");
}

TEST(Conformance, ConstraintValidation) {
  EXPECT_THROW(ConformanceConstraint{}.validate(), ContractViolation);
  ConformanceConstraint c;
  c.min_loops = 5;
  c.max_loops = 4;
  EXPECT_THROW(c.validate(), ContractViolation);
  EXPECT_THROW(constraint_from_json(nlohmann::json::object()), ContractViolation);
  EXPECT_THROW(constraint_from_json(nlohmann::json{{"min_loops", "six"}}), SchemaError);
  c.max_loops = 7;
  EXPECT_EQ(constraint_from_json(to_json(c)), c);
}

TEST(Conformance, EighteenCasesWithExactBounds) {
  auto suites = canonical_suites(0);
  ASSERT_EQ(suites.conformance.size(), 18u);
  for (std::size_t s = 0; s < 2; ++s) {
    const auto subject = s == 0 ? ConformanceSubject::american_revolution : ConformanceSubject::road_rage;
    for (std::size_t i = 0; i < 9; ++i) {
      const auto& c = suites.conformance[s * 9 + i];
      EXPECT_EQ(c.case_name, subject);
      EXPECT_EQ(c.prompt(), std::string(base_prompt(subject)) + ". " + render_instruction(c.constraint));
      EXPECT_EQ(c.instruction, render_instruction(c.constraint));
    }
  }
  const auto& rr = suites.conformance[9];
  EXPECT_EQ(rr.constraint.required_variables,
            (std::vector<std::string>{"Traffic Congestion", "Driver Stress", "Accidents"}));
  EXPECT_EQ(rr.title(), "for the case Road Rage");
  bool saw = false;
  for (const auto& c : suites.conformance) saw |= c.instruction.find("at least 8 feedback loops") != std::string::npos;
  EXPECT_TRUE(saw);
  EXPECT_EQ(suites.conformance[6].group(),
            "can conform to the instruction include a min number of feedback loops and a maximum number of variables");
  EXPECT_EQ(suites.conformance[2].group(), "can conform to the instruction include a maximum number of variables");
}

TEST(CanonicalSuites, FixtureRoundTrip) {
  auto suites = canonical_suites(0);
  auto doc = to_json(suites);
  auto back = suites_from_json(doc);
  EXPECT_EQ(to_json(back), doc);
  EXPECT_THROW(suites_from_json(nlohmann::json::object()), SchemaError);
  EXPECT_THROW(suites_from_json(nlohmann::json::array({{{"suite", "other"}}})), SchemaError);
}

TEST(CanonicalSuites, ShippedFixtureMatchesGenerator) {
  std::ifstream in(std::string(SDEVAL_DATA_DIR) + "/canonical_suites.json");
  ASSERT_TRUE(in) << "data/canonical_suites.json missing";
  auto shipped = nlohmann::json::parse(in);
  EXPECT_EQ(shipped, to_json(canonical_suites(0)));
}

TEST(CanonicalSuites, OtherSeedsStillWellFormed) {
  for (std::uint64_t seed : {1u, 42u, 977u}) {
    auto suites = canonical_suites(seed);
    ASSERT_EQ(suites.causal.size(), 24u);
    for (const auto& c : suites.causal) {
      EXPECT_NO_THROW(require_ground_truth(c.truth));
      EXPECT_EQ(split_sentences(c.description).size(), c.truth.relationships().size());
    }
    EXPECT_EQ(to_json(suites), to_json(canonical_suites(seed)));
  }
}
