#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <set>

#include "sdeval/errors.hpp"
#include "sdeval/harness.hpp"

namespace sdeval {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kFixtures = fs::path(SDEVAL_DATA_DIR) / "failure_log_fixtures.json";

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("sdeval_harness_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

// Returns each causal case's own ground truth.
struct OracleEngine : Engine {
  std::map<std::string, CausalMap> by_description;
  explicit OracleEngine(const CanonicalSuites& suites) {
    for (const auto& c : suites.causal) by_description[c.description] = c.truth;
  }
  std::string name() const override { return "oracle"; }
  std::string description() const override { return "test"; }
  std::vector<ParameterSpec> parameters() const override { return {}; }
  GenerateResponse generate(const GenerateRequest& r) const override {
    GenerateResponse out;
    out.map = by_description.at(r.background_knowledge.value());
    return out;
  }
};

// A candidate meeting every bound of `c`: required names plus fillers, with
// edges added in a fixed order until the loop floor is reached.
CausalMap conforming_map(const ConformanceConstraint& c) {
  std::vector<std::string> names = c.required_variables;
  std::size_t target_vars = std::max<std::size_t>({names.size(), 6, std::size_t(c.min_variables.value_or(0))});
  if (c.max_variables) target_vars = std::min<std::size_t>(target_vars, *c.max_variables);
  while (names.size() < target_vars) names.push_back("filler " + std::to_string(names.size()));
  const std::size_t loop_floor = c.min_loops.value_or(1);

  CausalMapBuilder b;
  for (const auto& n : names) b.variable(n);
  for (std::size_t i = 0; i < names.size() && enumerate_loops(b.build()).size() < loop_floor; ++i)
    for (std::size_t j = i + 1; j < names.size() && enumerate_loops(b.build()).size() < loop_floor; ++j) {
      b.relationship(names[i], names[j], Polarity::positive);
      b.relationship(names[j], names[i], Polarity::negative);
    }
  return std::move(b).build();
}

// Required names and a legal variable count, but no edges at all.
CausalMap loopless_map(const ConformanceConstraint& c) {
  std::vector<std::string> names = c.required_variables;
  std::size_t target = std::max<std::size_t>(names.size(), c.min_variables.value_or(0));
  while (names.size() < std::max<std::size_t>(target, 1)) names.push_back("filler " + std::to_string(names.size()));
  CausalMapBuilder b;
  for (const auto& n : names) b.variable(n);
  return std::move(b).build();
}

CausalMap flip_first(const CausalMap& truth) {
  CausalMapBuilder b;
  bool flipped = false;
  for (const auto& r : truth.relationships()) {
    b.relationship(r.from, r.to, flipped ? r.polarity : flip(r.polarity));
    flipped = true;
  }
  return std::move(b).build();
}

// Scripts what a model "answered" for each test and records transcripts
// through the real default engine, so a later replay run exercises the
// whole path.
struct Script {
  std::map<std::string, CausalMap> causal;       // by case id
  std::map<std::string, CausalMap> conformance;  // by case id
};

struct ScriptedProvider : CompletionProvider {
  std::map<std::string, std::string> by_background;
  std::map<std::string, std::string> by_prompt;
  std::mutex mu;
  ChatResult complete(const ChatRequest& r) override {
    std::lock_guard lock(mu);
    std::string content;
    for (const auto& [bg, answer] : by_background)
      if (r.messages.front().content.find(bg) != std::string::npos) content = answer;
    if (auto it = by_prompt.find(r.messages.back().content); it != by_prompt.end()) content = it->second;
    if (content.empty()) throw TransportError("unscripted request");
    json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
    return ChatResult{content, body.dump(), std::nullopt};
  }
};

RunConfig replay_config(const fs::path& dir, const std::string& model) {
  RunConfig config;
  config.engine = "default";
  config.provider.model = model;
  config.provider.api_key_env = "SDEVAL_HARNESS_TEST_UNSET_KEY";
  config.replay_dir = dir;
  return config;
}

void record(const fs::path& dir, const std::string& model, const Script& script) {
  const auto suites = canonical_suites(0);
  auto provider = std::make_shared<ScriptedProvider>();
  for (const auto& c : suites.causal)
    provider->by_background[c.description] = to_wire(script.causal.at(c.id)).dump();
  for (const auto& c : suites.conformance) provider->by_prompt[c.prompt()] = to_wire(script.conformance.at(c.id)).dump();
  auto config = replay_config(dir, model);
  config.replay_dir.reset();
  auto recorder = std::make_shared<RecordingProvider>(provider, dir);
  LlmEngine engine(LlmEngine::Variant::standard, recorder, config.provider);
  run_suite(config, engine, suites);
}

// Passes everything except `polarity_failures` causal cases (first edge
// flipped) and `loop_failures` conformance cases with a loop floor (no edges).
Script script_with(std::size_t polarity_failures, std::size_t loop_failures) {
  const auto suites = canonical_suites(0);
  Script s;
  for (const auto& c : suites.causal)
    s.causal[c.id] = s.causal.size() < polarity_failures ? flip_first(c.truth) : c.truth;
  std::size_t left = loop_failures;
  for (const auto& c : suites.conformance) {
    if (left > 0 && c.constraint.min_loops) {
      s.conformance[c.id] = loopless_map(c.constraint);
      --left;
    } else {
      s.conformance[c.id] = conforming_map(c.constraint);
    }
  }
  return s;
}

std::string without_timing(const RunReport& r, ReportFormat f) {
  auto text = render_report(r, f);
  if (f == ReportFormat::json) {
    auto doc = json::parse(text);
    doc.erase("timing");
    return doc.dump();
  }
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("Started ", 0) != 0 && line.rfind("timing,", 0) != 0) out += line + "\n";
  return out;
}

// --- run_suite ---------------------------------------------------------------

TEST(RunSuite, OracleEnginePassesEveryCausalTest) {
  const auto suites = canonical_suites(0);
  OracleEngine oracle(suites);
  RunConfig config;
  config.suites = {Suite::causal};
  config.label = "oracle";
  auto report = run_suite(config, oracle, suites);
  ASSERT_EQ(report.tests.size(), 24u);
  EXPECT_EQ(report.scores.causal_passed, 24u);
  EXPECT_EQ(report.scores.causal_total, 24u);
  EXPECT_EQ(report.scores.causal_percent(), "100.0%");
  EXPECT_TRUE(report.errored_ids().empty());
  EXPECT_TRUE(render_failure_log(report).empty());
}

TEST(RunSuite, PredPreyFailsEveryCausalTestAsMultiple) {
  const auto suites = canonical_suites(0);
  // Independent expectation: predprey's pairs never occur in a truth and
  // every truth has at least one pair, so each test has both fake and
  // missing relationships.
  const std::set<std::pair<std::string, std::string>> predprey = {{"predators", "prey"}, {"prey", "predators"}};
  for (const auto& c : suites.causal) {
    ASSERT_FALSE(c.truth.relationships().empty());
    for (const auto& r : c.truth.relationships()) ASSERT_FALSE(predprey.count({r.from, r.to}));
  }

  RunConfig config;
  config.suites = {Suite::causal};
  config.concurrency = 4;
  auto report = run_suite(config, PredPreyEngine(), suites);
  EXPECT_EQ(report.scores.causal_passed, 0u);
  EXPECT_EQ(report.scores.causal_total, 24u);
  for (const auto& t : report.tests) {
    ASSERT_TRUE(t.outcome);
    EXPECT_EQ(t.outcome->category, FailureCategory::multiple) << t.test_id;
  }
  auto counts = failure_counts(report, Suite::causal);
  for (const auto& [c, n] : counts) EXPECT_EQ(n, c == FailureCategory::multiple ? 24u : 0u);
}

TEST(RunSuite, FullPathWithPredPreyNeedsNoKey) {
  RunConfig config;
  config.engine = "predprey";
  config.provider.api_key_env = "SDEVAL_HARNESS_TEST_UNSET_KEY";
  ::unsetenv("SDEVAL_HARNESS_TEST_UNSET_KEY");
  auto report = run_suite(config);
  EXPECT_EQ(report.scores.causal_total, 24u);
  EXPECT_EQ(report.scores.conformance_total, 18u);
  EXPECT_EQ(report.scores.causal_passed, 0u);
}

TEST(RunSuite, ConfigurationErrorsAbortBeforeAnyTest) {
  ::unsetenv("SDEVAL_HARNESS_TEST_UNSET_KEY");
  RunConfig config;
  config.provider.api_key_env = "SDEVAL_HARNESS_TEST_UNSET_KEY";
  EXPECT_THROW(run_suite(config), ConfigError);  // live LLM run without a key

  RunConfig unknown = config;
  unknown.engine = "nope";
  EXPECT_THROW(run_suite(unknown), ConfigError);

  RunConfig zero = config;
  zero.engine = "predprey";
  zero.concurrency = 0;
  EXPECT_THROW(run_suite(zero), ConfigError);

  RunConfig none = zero;
  none.concurrency = 1;
  none.suites.clear();
  EXPECT_THROW(run_suite(none), ConfigError);

  RunConfig missing_replay = config;
  missing_replay.replay_dir = fresh_dir("absent");
  EXPECT_THROW(run_suite(missing_replay), ConfigError);

  RunConfig bad_param = config;
  bad_param.engine = "predprey";
  bad_param.parameters["model"] = "x";
  EXPECT_THROW(run_suite(bad_param), ConfigError);
}

TEST(RunSuite, ReplayReproducesReferenceScoreRows) {
  struct Row {
    std::string model;
    std::size_t polarity_failures, loop_failures;
    std::string causal, conformance, overall;
  };
  for (const Row& row : {Row{"gpt-4.5-preview", 0, 3, "100.0%", "83.3%", "92.9%"},
                         Row{"gpt-4o", 14, 4, "41.7%", "77.8%", "57.1%"}}) {
    auto dir = fresh_dir("score_rows");
    record(dir, row.model, script_with(row.polarity_failures, row.loop_failures));
    auto report = run_suite(replay_config(dir, row.model));
    EXPECT_TRUE(report.errored_ids().empty());
    EXPECT_EQ(report.scores.causal_percent(), row.causal) << row.model;
    EXPECT_EQ(report.scores.conformance_percent(), row.conformance) << row.model;
    EXPECT_EQ(report.scores.overall_percent(), row.overall) << row.model;
    auto causal = failure_counts(report, Suite::causal);
    for (const auto& [c, n] : causal) EXPECT_EQ(n, c == FailureCategory::polarity ? row.polarity_failures : 0u);
    auto conformance = failure_counts(report, Suite::conformance);
    for (const auto& [c, n] : conformance) EXPECT_EQ(n, c == FailureCategory::too_few_loops ? row.loop_failures : 0u);
    fs::remove_all(dir);
  }
}

TEST(RunSuite, ReplayIsDeterministicAndConcurrencyIndependent) {
  auto dir = fresh_dir("determinism");
  record(dir, "gpt-4o", script_with(5, 2));
  auto config = replay_config(dir, "gpt-4o");
  auto first = run_suite(config);
  auto second = run_suite(config);
  config.concurrency = 8;
  auto parallel = run_suite(config);
  for (auto f : {ReportFormat::json, ReportFormat::csv, ReportFormat::markdown}) {
    EXPECT_EQ(without_timing(first, f), without_timing(second, f));
    EXPECT_EQ(without_timing(first, f), without_timing(parallel, f));
  }
  // The timestamp sits in exactly one JSON field.
  auto doc = json::parse(render_report(first, ReportFormat::json));
  EXPECT_TRUE(doc["timing"].contains("started_at"));
  doc.erase("timing");
  EXPECT_EQ(doc.dump().find(first.started_at), std::string::npos);
  fs::remove_all(dir);
}

TEST(RunSuite, MissingTranscriptIsErroredNotFailed) {
  auto dir = fresh_dir("errored");
  record(dir, "gpt-4o", script_with(0, 0));
  // Remove the transcript for the first causal case.
  const auto suites = canonical_suites(0);
  LlmEngine engine(LlmEngine::Variant::standard, std::make_shared<ReplayProvider>(dir),
                   replay_config(dir, "gpt-4o").provider);
  GenerateRequest first{PromptSet::builtin().causal_task, std::nullopt, suites.causal[0].description, std::nullopt, {}};
  ASSERT_TRUE(fs::remove(transcript_path(dir, engine.prepare(first).hash())));

  auto report = run_suite(replay_config(dir, "gpt-4o"));
  EXPECT_EQ(report.errored_ids(), std::vector<std::string>{suites.causal[0].id});
  EXPECT_EQ(report.scores.causal_total, 23u);
  EXPECT_EQ(report.scores.causal_passed, 23u);
  EXPECT_EQ(report.scores.causal_percent(), "100.0%");
  auto md = render_report(report, ReportFormat::markdown);
  EXPECT_NE(md.find("| 1 |"), std::string::npos);
  EXPECT_NE(md.find(suites.causal[0].id), std::string::npos);
  fs::remove_all(dir);
}

TEST(RunSuite, ScoreConservation) {
  auto dir = fresh_dir("conservation");
  record(dir, "m", script_with(7, 3));
  auto report = run_suite(replay_config(dir, "m"));
  EXPECT_EQ(report.scores, aggregate(report.outcomes()));
  for (Suite s : {Suite::causal, Suite::conformance}) {
    std::size_t total = 0, passed = 0, errored = 0, counted = 0;
    for (const auto& t : report.tests) {
      if (t.suite != s) continue;
      ++total;
      if (t.errored()) ++errored;
      else if (t.outcome->pass) ++passed;
    }
    for (const auto& [_, n] : failure_counts(report, s)) counted += n;
    EXPECT_EQ(counted, total - passed - errored);
  }
  fs::remove_all(dir);
}

// --- rendering -----------------------------------------------------------------

RunReport polarity_report(std::size_t failures) {
  const auto suites = canonical_suites(0);
  RunReport r;
  r.model = "gpt-4o";
  r.engine = "default";
  r.suites = {Suite::causal};
  for (std::size_t i = 0; i < suites.causal.size(); ++i) {
    const auto& c = suites.causal[i];
    TestRecord t;
    t.test_id = c.id;
    t.group = std::string(group_label(c.group));
    t.title = c.title;
    t.outcome = score_causal_translation(i < failures ? flip_first(c.truth) : c.truth, c);
    r.tests.push_back(t);
  }
  r.scores = aggregate(r.outcomes());
  return r;
}

TEST(Render, FailureCountPolarityRow) {
  auto report = polarity_report(14);
  auto md = render_report(report, ReportFormat::markdown);
  EXPECT_NE(md.find("| LLM | Fake relationship | Missing relationship | Multiple Kinds of Failures | Polarity | Grand "
                    "Total |"),
            std::string::npos)
      << md;
  EXPECT_NE(md.find("| gpt-4o | 0 | 0 | 0 | 14 | 14 |"), std::string::npos) << md;
  auto doc = json::parse(render_report(report, ReportFormat::json));
  EXPECT_EQ(doc["tables"]["causal_failures"]["Polarity"], 14);
  EXPECT_EQ(doc["tables"]["causal_failures"]["Grand Total"], 14);
}

TEST(Render, AllPassReport) {
  auto report = polarity_report(0);
  EXPECT_TRUE(render_failure_log(report).empty());
  auto md = render_report(report, ReportFormat::markdown);
  EXPECT_NE(md.find("| gpt-4o | 100.0% |"), std::string::npos) << md;
  EXPECT_NE(md.find("No failures."), std::string::npos);
  EXPECT_TRUE(json::parse(render_report(report, ReportFormat::json))["failure_log"].empty());
}

TEST(Render, FailureLogFollowsReferenceLayout) {
  auto report = polarity_report(2);
  auto log = render_failure_log(report);
  const auto& first = report.tests[0];
  const std::string header =
      "1) gpt-4o | causal translation testing | " + first.group + " | " + first.title + "\n\nMessage:\n\n";
  EXPECT_EQ(log.rfind(header, 0), 0u) << log;
  EXPECT_NE(log.find("\n2) gpt-4o | causal translation testing | "), std::string::npos);
  EXPECT_NE(log.find("Incorrect polarity discovered: Expected "), std::string::npos) << log;
  EXPECT_EQ(log.find("3) "), std::string::npos);
}

TEST(Render, CsvAndMarkdownAgree) {
  auto dir = fresh_dir("agree");
  record(dir, "m", script_with(9, 4));
  auto report = run_suite(replay_config(dir, "m"));
  auto csv = render_report(report, ReportFormat::csv);
  auto md = render_report(report, ReportFormat::markdown);

  std::map<std::string, std::vector<std::string>> rows;  // table -> values in order
  std::regex line(R"(^(overall|causal_failures|conformance_failures),m,([^,]+),([^,]+)$)");
  std::istringstream in(csv);
  for (std::string l; std::getline(in, l);) {
    std::smatch m;
    if (std::regex_match(l, m, line)) rows[m[1]].push_back(m[3]);
  }
  ASSERT_EQ(rows["overall"].size(), 4u);
  auto md_row = [](const std::vector<std::string>& values) {
    std::string s = "| m |";
    for (const auto& v : values) s += " " + v + " |";
    return s;
  };
  EXPECT_NE(md.find(md_row(rows["overall"]) + "\n"), std::string::npos) << md_row(rows["overall"]);
  EXPECT_NE(md.find(md_row(rows["causal_failures"]) + "\n"), std::string::npos);
  EXPECT_NE(md.find(md_row(rows["conformance_failures"]) + "\n"), std::string::npos);
  EXPECT_EQ(rows["causal_failures"].back(), "9");
  fs::remove_all(dir);
}

TEST(Render, CsvQuotesMultilineMessages) {
  auto report = polarity_report(0);
  const auto suites = canonical_suites(0);
  report.tests[0].outcome = score_causal_translation(CausalMap{}, suites.causal[0]);
  auto csv = render_report(report, ReportFormat::csv);
  EXPECT_NE(csv.find("failure_log,1,message,\"Real relationships not found\n"), std::string::npos) << csv;
}

TEST(Render, FormatNames) {
  EXPECT_EQ(parse_report_format("json"), ReportFormat::json);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::csv);
  EXPECT_EQ(parse_report_format("markdown"), ReportFormat::markdown);
  EXPECT_THROW(parse_report_format("xml"), ConfigError);
}

// --- fixtures --------------------------------------------------------------------

TEST(Fixtures, EveryShippedFixtureReproduces) {
  auto summary = verify_fixtures(kFixtures);
  ASSERT_GE(summary.results.size(), 12u);
  for (const auto& r : summary.results) {
    EXPECT_TRUE(r.ok()) << r.id << ": " << r.detail;
    EXPECT_TRUE(r.messages_match) << r.id;
  }
  EXPECT_TRUE(summary.ok());
}

TEST(Fixtures, RequiredItemsArePresent) {
  auto summary = verify_fixtures(kFixtures);
  std::map<int, FixtureResult> by_item;
  for (const auto& r : summary.results) by_item[r.item] = r;
  for (int item : {4, 9, 13, 63, 85, 87, 102, 109, 113, 124, 133}) EXPECT_TRUE(by_item.count(item)) << item;
  bool polarity_only = false;
  for (const auto& [item, r] : by_item) polarity_only |= item >= 31 && item <= 44 && r.expected == FailureCategory::polarity;
  EXPECT_TRUE(polarity_only);
  EXPECT_EQ(by_item.at(4).actual, FailureCategory::multiple);
  EXPECT_EQ(by_item.at(87).actual, FailureCategory::too_many_loops);
  EXPECT_EQ(by_item.at(133).actual, FailureCategory::too_few_variables);
}

TEST(Fixtures, DivergenceIsReported) {
  auto doc = json::parse(std::ifstream(kFixtures));
  doc[0]["expected_category"] = "polarity";
  doc[1]["expected_messages"][0] = "something else";
  auto dir = fresh_dir("fixtures");
  fs::create_directories(dir);
  std::ofstream(dir / "f.json") << doc.dump();
  auto summary = verify_fixtures(dir / "f.json");
  EXPECT_FALSE(summary.ok());
  EXPECT_FALSE(summary.results[0].ok());
  EXPECT_FALSE(summary.results[1].ok());
  EXPECT_FALSE(summary.results[1].messages_match);
  EXPECT_EQ(summary.passed(), summary.results.size() - 2);
  fs::remove_all(dir);
}

TEST(Fixtures, MissingFileIsConfigError) {
  EXPECT_THROW(verify_fixtures(fresh_dir("nofile") / "absent.json"), ConfigError);
}

}  // namespace
}  // namespace sdeval
