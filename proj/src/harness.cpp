#include "sdeval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "sdeval/errors.hpp"

namespace sdeval {

std::string_view to_string(ReportFormat f) noexcept {
  switch (f) {
    case ReportFormat::json: return "json";
    case ReportFormat::csv: return "csv";
    case ReportFormat::markdown: return "markdown";
  }
  return "json";
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw ConfigError("unknown report format \"" + std::string(s) + "\" (expected json, csv or markdown)");
}

void RunConfig::validate() const {
  if (suites.empty()) throw ConfigError("at least one suite must be selected");
  if (concurrency == 0) throw ConfigError("concurrency must be at least 1");
  if (replay_dir && record_dir) throw ConfigError("replay and record cannot be combined");
  if (engine.empty()) throw ConfigError("engine name must not be empty");
}

std::vector<std::string> RunReport::errored_ids() const {
  std::vector<std::string> out;
  for (const auto& t : tests)
    if (t.errored()) out.push_back(t.test_id);
  return out;
}

std::vector<EvalOutcome> RunReport::outcomes() const {
  std::vector<EvalOutcome> out;
  for (const auto& t : tests)
    if (t.outcome) out.push_back(*t.outcome);
  return out;
}

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

bool wants(const RunConfig& config, Suite s) {
  return std::find(config.suites.begin(), config.suites.end(), s) != config.suites.end();
}

struct Job {
  Suite suite;
  std::size_t index;  // into the suite's case list
  GenerateRequest request;
};

struct JobResult {
  std::optional<GenerateResponse> response;
  std::string error;
  std::chrono::milliseconds latency{0};
};

}  // namespace

RunReport run_suite(const RunConfig& config, const Engine& engine, const CanonicalSuites& cases) {
  config.validate();
  try {
    resolve_parameters(engine.name(), engine.parameters(), config.parameters);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }

  RunReport report;
  if (config.label) {
    report.model = *config.label;
  } else if (auto it = config.parameters.find("model"); it != config.parameters.end() && it->second.is_string()) {
    report.model = it->second.get<std::string>();
  } else {
    report.model = dynamic_cast<const LlmEngine*>(&engine) ? config.provider.model : engine.name();
  }
  report.engine = engine.name();
  report.seed = config.seed;
  for (Suite s : {Suite::causal, Suite::conformance})
    if (wants(config, s)) report.suites.push_back(s);
  report.started_at = utc_now();
  const auto start = std::chrono::steady_clock::now();

  const std::string task = config.causal_task.value_or(PromptSet::builtin().causal_task);
  std::vector<Job> jobs;
  if (wants(config, Suite::causal)) {
    for (std::size_t i = 0; i < cases.causal.size(); ++i)
      jobs.push_back({Suite::causal, i,
                      GenerateRequest{task, std::nullopt, cases.causal[i].description, std::nullopt,
                                      config.parameters}});
  }
  if (wants(config, Suite::conformance)) {
    for (std::size_t i = 0; i < cases.conformance.size(); ++i)
      jobs.push_back({Suite::conformance, i,
                      GenerateRequest{cases.conformance[i].prompt(), std::nullopt, std::nullopt, std::nullopt,
                                      config.parameters}});
  }

  std::vector<JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        results[i].response = engine.generate(jobs[i].request);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
      results[i].latency =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    }
  };
  const std::size_t workers = std::min(config.concurrency, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Scoring runs here, in case order, whatever order the workers finished in.
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    auto& result = results[i];
    TestRecord record;
    record.suite = job.suite;
    record.latency = result.latency;
    if (job.suite == Suite::causal) {
      const auto& gt = cases.causal[job.index];
      record.test_id = gt.id;
      record.group = std::string(group_label(gt.group));
      record.title = gt.title;
    } else {
      const auto& cc = cases.conformance[job.index];
      record.test_id = cc.id;
      record.group = cc.group();
      record.title = cc.title();
    }
    if (result.response) {
      try {
        record.outcome = job.suite == Suite::causal
                             ? score_causal_translation(result.response->map, cases.causal[job.index])
                             : score_conformance(result.response->map, cases.conformance[job.index]);
      } catch (const std::exception& e) {
        record.error = e.what();
      }
    } else {
      record.error = result.error;
    }
    report.tests.push_back(std::move(record));
  }

  const auto outcomes = report.outcomes();
  report.scores = aggregate(outcomes);
  report.wall_clock =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return report;
}

RunReport run_suite(const RunConfig& config) {
  config.validate();
  config.provider.validate();

  std::shared_ptr<CompletionProvider> provider;
  if (config.replay_dir) {
    provider = std::make_shared<ReplayProvider>(*config.replay_dir);
  } else {
    provider = std::make_shared<OpenAiClient>(config.provider);
    if (config.record_dir) provider = std::make_shared<RecordingProvider>(provider, *config.record_dir);
  }
  const auto registry = make_default_registry(provider, config.provider);
  std::shared_ptr<const Engine> engine;
  try {
    engine = registry.share(config.engine);
  } catch (const EngineNotFoundError& e) {
    throw ConfigError(e.what());
  }
  if (!config.replay_dir && dynamic_cast<const LlmEngine*>(engine.get())) {
    const char* key = std::getenv(config.provider.api_key_env.c_str());
    if (!key || !*key)
      throw ConfigError("API key environment variable " + config.provider.api_key_env +
                        " is not set (use --replay to run from transcripts)");
  }
  return run_suite(config, *engine, canonical_suites(config.seed));
}

// --- rendering --------------------------------------------------------------

std::vector<std::pair<FailureCategory, std::size_t>> failure_counts(const RunReport& report, Suite suite) {
  std::vector<std::pair<FailureCategory, std::size_t>> out;
  if (suite == Suite::causal) {
    for (auto c : kCausalCategories) out.emplace_back(c, 0);
  } else {
    for (auto c : kConformanceCategories) out.emplace_back(c, 0);
  }
  for (const auto& t : report.tests) {
    if (t.suite != suite || !t.outcome || !t.outcome->category) continue;
    for (auto& [c, n] : out)
      if (c == *t.outcome->category) ++n;
  }
  return out;
}

namespace {

struct LogEntry {
  std::size_t number;
  std::string header;
  std::vector<std::string> messages;
};

std::vector<LogEntry> failure_entries(const RunReport& report) {
  std::vector<LogEntry> out;
  for (const auto& t : report.tests) {
    if (!t.outcome || t.outcome->pass) continue;
    LogEntry e{out.size() + 1,
               std::to_string(out.size() + 1) + ") " + report.model + " | " + std::string(suite_label(t.suite)) +
                   " | " + t.group + " | " + t.title,
               {}};
    for (const auto& f : t.outcome->findings) e.messages.push_back(render_message(f));
    out.push_back(std::move(e));
  }
  return out;
}

std::size_t grand_total(const std::vector<std::pair<FailureCategory, std::size_t>>& counts) {
  std::size_t n = 0;
  for (const auto& [_, c] : counts) n += c;
  return n;
}

std::string render_json(const RunReport& report) {
  using nlohmann::json;
  json latency = json::object();
  for (const auto& t : report.tests) latency[t.test_id] = t.latency.count();

  json suites = json::array();
  for (auto s : report.suites) suites.push_back(to_string(s));

  json tables = json::object();
  tables["overall"] = {{"model", report.model},
                       {"causal_translation", report.scores.causal_percent()},
                       {"conformance", report.scores.conformance_percent()},
                       {"overall", report.scores.overall_percent()},
                       {"errored", report.errored_ids().size()}};
  for (Suite s : {Suite::causal, Suite::conformance}) {
    auto counts = failure_counts(report, s);
    json row = json::object();
    for (const auto& [c, n] : counts) row[std::string(category_label(c))] = n;
    row["Grand Total"] = grand_total(counts);
    tables[s == Suite::causal ? "causal_failures" : "conformance_failures"] = row;
  }

  json tests = json::array();
  json errored = json::array();
  for (const auto& t : report.tests) {
    json entry = {{"test_id", t.test_id}, {"suite", to_string(t.suite)}, {"group", t.group}, {"title", t.title}};
    if (t.outcome) {
      entry["pass"] = t.outcome->pass;
      entry["category"] = t.outcome->category ? json(to_string(*t.outcome->category)) : json(nullptr);
      json findings = json::array();
      for (const auto& f : t.outcome->findings) findings.push_back(to_json(f));
      entry["findings"] = findings;
    } else {
      entry["errored"] = true;
      entry["error"] = *t.error;
      errored.push_back({{"test_id", t.test_id}, {"error", *t.error}});
    }
    tests.push_back(entry);
  }

  json log = json::array();
  for (const auto& e : failure_entries(report))
    log.push_back({{"number", e.number}, {"header", e.header}, {"messages", e.messages}});

  json doc = {
      {"timing", {{"started_at", report.started_at}, {"wall_clock_ms", report.wall_clock.count()}, {"latency_ms", latency}}},
      {"run", {{"model", report.model}, {"engine", report.engine}, {"seed", report.seed}, {"suites", suites}}},
      {"scores", to_json(report.scores)},
      {"tables", tables},
      {"errored", errored},
      {"tests", tests},
      {"failure_log", log},
  };
  return doc.dump(2) + "\n";
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_csv(const RunReport& report) {
  std::ostringstream out;
  auto row = [&](std::string_view table, std::string_view key, std::string_view column, std::string_view value) {
    out << csv_field(table) << ',' << csv_field(key) << ',' << csv_field(column) << ',' << csv_field(value) << '\n';
  };
  row("table", "row", "column", "value");
  row("timing", "run", "started_at", report.started_at);
  row("run", "run", "model", report.model);
  row("run", "run", "engine", report.engine);
  row("run", "run", "seed", std::to_string(report.seed));

  const auto& s = report.scores;
  row("overall", report.model, "Causal Translation", s.causal_percent());
  row("overall", report.model, "Conformance", s.conformance_percent());
  row("overall", report.model, "Overall", s.overall_percent());
  row("overall", report.model, "Errored", std::to_string(report.errored_ids().size()));
  for (Suite suite : {Suite::causal, Suite::conformance}) {
    const auto counts = failure_counts(report, suite);
    const std::string table = suite == Suite::causal ? "causal_failures" : "conformance_failures";
    for (const auto& [c, n] : counts) row(table, report.model, category_label(c), std::to_string(n));
    row(table, report.model, "Grand Total", std::to_string(grand_total(counts)));
  }
  for (const auto& t : report.tests) {
    std::string result = t.errored() ? "errored" : (t.outcome->pass ? "pass" : "fail");
    row("test", t.test_id, "result", result);
    if (t.outcome && t.outcome->category) row("test", t.test_id, "category", to_string(*t.outcome->category));
    if (t.error) row("test", t.test_id, "error", *t.error);
  }
  for (const auto& e : failure_entries(report)) {
    row("failure_log", std::to_string(e.number), "header", e.header);
    for (const auto& m : e.messages) row("failure_log", std::to_string(e.number), "message", m);
  }
  return out.str();
}

std::string render_markdown(const RunReport& report) {
  std::ostringstream out;
  out << "# Evaluation report\n\n";
  out << "Started " << report.started_at << ", wall clock " << report.wall_clock.count() << " ms\n\n";
  out << "Model `" << report.model << "`, engine `" << report.engine << "`, seed " << report.seed << ".\n\n";

  const auto& s = report.scores;
  out << "## Overall results\n\n";
  out << "| LLM | Causal Translation | Conformance | Overall | Errored |\n";
  out << "|---|---|---|---|---|\n";
  out << "| " << report.model << " | " << s.causal_percent() << " | " << s.conformance_percent() << " | "
      << s.overall_percent() << " | " << report.errored_ids().size() << " |\n\n";
  out << "Passed " << s.causal_passed << "/" << s.causal_total << " causal translation and " << s.conformance_passed
      << "/" << s.conformance_total << " conformance tests.\n\n";

  for (Suite suite : {Suite::causal, Suite::conformance}) {
    const auto counts = failure_counts(report, suite);
    out << (suite == Suite::causal ? "## Causal translation failures\n\n" : "## Conformance failures\n\n");
    out << "| LLM |";
    for (const auto& [c, _] : counts) out << ' ' << category_label(c) << " |";
    out << " Grand Total |\n|---|";
    for (std::size_t i = 0; i <= counts.size(); ++i) out << "---|";
    out << "\n| " << report.model << " |";
    for (const auto& [_, n] : counts) out << ' ' << n << " |";
    out << ' ' << grand_total(counts) << " |\n\n";
  }

  out << "## Errored tests\n\n";
  const auto errored = report.errored_ids();
  if (errored.empty()) out << "None.\n\n";
  for (const auto& t : report.tests)
    if (t.errored()) out << "- `" << t.test_id << "`: " << *t.error << "\n";
  if (!errored.empty()) out << "\n";

  out << "## Failure log\n\n";
  const auto entries = failure_entries(report);
  if (entries.empty()) {
    out << "No failures.\n";
    return out.str();
  }
  out << "```text\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) out << "\n";
    out << entries[i].header << "\n";
    for (const auto& m : entries[i].messages) out << "\nMessage:\n\n" << m << "\n";
  }
  out << "```\n";
  return out.str();
}

}  // namespace

std::string render_failure_log(const RunReport& report) {
  std::string out;
  for (const auto& e : failure_entries(report)) {
    if (!out.empty()) out += "\n";
    out += e.header + "\n";
    for (const auto& m : e.messages) out += "\nMessage:\n\n" + m + "\n";
  }
  return out;
}

std::string render_report(const RunReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: return render_json(report);
    case ReportFormat::csv: return render_csv(report);
    case ReportFormat::markdown: return render_markdown(report);
  }
  return render_json(report);
}

// --- fixtures ---------------------------------------------------------------

std::size_t FixtureSummary::passed() const {
  return static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [](const auto& r) { return r.ok(); }));
}

FixtureSummary verify_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("fixture file " + path.string() + " not found");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("fixture file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_array()) throw ConfigError("fixture file " + path.string() + " must hold a JSON array");

  FixtureSummary summary;
  for (const auto& entry : doc) {
    FixtureResult r;
    try {
      r.id = entry.at("id").get<std::string>();
      r.item = entry.value("item", 0);
      r.expected = parse_failure_category(entry.at("expected_category").get<std::string>());
      const auto expected_messages = entry.at("expected_messages").get<std::vector<std::string>>();
      const CausalMap candidate = from_wire(entry.at("candidate"));

      EvalOutcome outcome;
      if (parse_suite(entry.at("suite").get<std::string>()) == Suite::causal) {
        GroundTruthCase gt;
        gt.id = r.id;
        gt.title = entry.value("title", "");
        gt.truth = from_wire(entry.at("truth"));
        outcome = score_causal_translation(candidate, gt);
      } else {
        auto cc = make_conformance_case(r.id, parse_conformance_subject(entry.at("case").get<std::string>()),
                                        constraint_from_json(entry.at("constraint")));
        outcome = score_conformance(candidate, cc);
      }
      r.actual = outcome.category;
      std::vector<std::string> messages;
      for (const auto& f : outcome.findings) messages.push_back(render_message(f));
      r.messages_match = messages == expected_messages;

      if (outcome.pass) {
        r.detail = "candidate passed; expected " + std::string(to_string(r.expected));
      } else if (*r.actual != r.expected) {
        r.detail = "category " + std::string(to_string(*r.actual)) + ", expected " + std::string(to_string(r.expected));
      } else if (!r.messages_match) {
        r.detail = "messages differ";
        for (std::size_t i = 0; i < std::max(messages.size(), expected_messages.size()); ++i) {
          const std::string got = i < messages.size() ? messages[i] : "<none>";
          const std::string want = i < expected_messages.size() ? expected_messages[i] : "<none>";
          if (got != want) {
            r.detail += " at message " + std::to_string(i + 1) + ":\n--- expected\n" + want + "\n--- actual\n" + got;
            break;
          }
        }
      }
    } catch (const std::exception& e) {
      r.detail = std::string("unreadable fixture: ") + e.what();
    }
    summary.results.push_back(std::move(r));
  }
  return summary;
}

}  // namespace sdeval
