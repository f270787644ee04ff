#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdeval/engines.hpp"
#include "sdeval/evaluation.hpp"
#include "sdeval/synthesis.hpp"

namespace sdeval {

enum class ReportFormat { json, csv, markdown };

std::string_view to_string(ReportFormat f) noexcept;
ReportFormat parse_report_format(std::string_view s);

struct RunConfig {
  std::vector<Suite> suites{Suite::causal, Suite::conformance};
  std::string engine = "default";
  ProviderConfig provider;
  std::uint64_t seed = 0;
  std::size_t concurrency = 1;
  std::optional<std::filesystem::path> replay_dir;
  std::optional<std::filesystem::path> record_dir;
  // Engine parameters applied to every test.
  ParameterBag parameters;
  // User prompt for causal-translation tests; the built-in one when unset.
  std::optional<std::string> causal_task;
  // Name shown in reports. Defaults to the model parameter, then the
  // provider model for LLM engines, then the engine name.
  std::optional<std::string> label;

  // Throws ConfigError on an empty suite list, zero concurrency, or
  // replay and record both set.
  void validate() const;
};

struct TestRecord {
  std::string test_id;
  Suite suite = Suite::causal;
  std::string group;  // log label
  std::string title;
  std::optional<EvalOutcome> outcome;  // unset when the test errored
  std::optional<std::string> error;
  std::chrono::milliseconds latency{0};

  bool errored() const noexcept { return !outcome.has_value(); }
};

struct RunReport {
  std::string model;
  std::string engine;
  std::uint64_t seed = 0;
  std::vector<Suite> suites;
  // The only wall-clock data; kept apart so reports diff cleanly.
  std::string started_at;
  std::chrono::milliseconds wall_clock{0};
  // Causal tests first, each suite in case order.
  std::vector<TestRecord> tests;
  ScoreCard scores;

  std::vector<std::string> errored_ids() const;
  std::vector<EvalOutcome> outcomes() const;
};

// Runs the requested suites of `cases` through `engine`. Engine and scoring
// errors are recorded per test. Throws ConfigError when the run parameters
// do not fit the engine.
RunReport run_suite(const RunConfig& config, const Engine& engine, const CanonicalSuites& cases);

// Builds the provider (live, recording or replay), the default registry and
// the canonical suites for `config.seed`, then runs. Configuration problems,
// including a missing API key for a live LLM run, throw ConfigError before
// any test starts.
RunReport run_suite(const RunConfig& config);

// Failure counts per category for one suite, in table column order.
std::vector<std::pair<FailureCategory, std::size_t>> failure_counts(const RunReport& report, Suite suite);

// Numbered failure log entries, one per failed test.
std::string render_failure_log(const RunReport& report);

std::string render_report(const RunReport& report, ReportFormat format);

struct FixtureResult {
  std::string id;
  int item = 0;
  FailureCategory expected = FailureCategory::multiple;
  std::optional<FailureCategory> actual;
  bool messages_match = false;
  std::string detail;  // empty when the fixture reproduced

  bool ok() const noexcept { return detail.empty(); }
};

struct FixtureSummary {
  std::vector<FixtureResult> results;
  std::size_t passed() const;
  bool ok() const { return passed() == results.size(); }
};

// Rescores every recorded candidate and compares category and messages.
// Throws ConfigError when the file is missing or unreadable.
FixtureSummary verify_fixtures(const std::filesystem::path& path);

}  // namespace sdeval
