// sd-eval: run the benchmark suites, export them, check the failure-log
// fixtures, or serve the engines over HTTP.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "sdeval/errors.hpp"
#include "sdeval/harness.hpp"
#include "sdeval/service.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kErrored = 1;
constexpr int kConfig = 2;

struct ProviderFlags {
  std::string model = sdeval::ProviderConfig{}.model;
  std::string base_url = sdeval::ProviderConfig{}.base_url;
  std::string api_key_env = sdeval::ProviderConfig{}.api_key_env;
  std::string reasoning_effort;
  long timeout_ms = sdeval::ProviderConfig{}.timeout.count();
  int max_retries = sdeval::ProviderConfig{}.max_retries;
  std::size_t max_in_flight = sdeval::ProviderConfig{}.max_in_flight;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model, "Provider model identifier")->capture_default_str();
    cmd->add_option("--base-url", base_url, "OpenAI-compatible API base URL")->capture_default_str();
    cmd->add_option("--api-key-env", api_key_env, "Environment variable holding the API key")->capture_default_str();
    cmd->add_option("--reasoning-effort", reasoning_effort, "low, medium or high");
    cmd->add_option("--timeout-ms", timeout_ms, "Provider request timeout")->capture_default_str();
    cmd->add_option("--max-retries", max_retries, "Retries on transient provider errors")->capture_default_str();
    cmd->add_option("--max-in-flight", max_in_flight, "Concurrent provider requests")->capture_default_str();
  }

  sdeval::ProviderConfig config() const {
    sdeval::ProviderConfig c;
    c.model = model;
    c.base_url = base_url;
    c.api_key_env = api_key_env;
    if (!reasoning_effort.empty()) c.reasoning_effort = reasoning_effort;
    c.timeout = std::chrono::milliseconds(timeout_ms);
    c.max_retries = max_retries;
    c.max_in_flight = max_in_flight;
    c.validate();
    return c;
  }
};

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw sdeval::ConfigError("cannot write " + path);
}

std::vector<sdeval::Suite> suites_from_flag(const std::string& flag) {
  if (flag == "all") return {sdeval::Suite::causal, sdeval::Suite::conformance};
  try {
    return {sdeval::parse_suite(flag)};
  } catch (const sdeval::Error&) {
    throw sdeval::ConfigError("unknown suite \"" + flag + "\" (expected causal, conformance or all)");
  }
}

int serve(const std::string& addr, const ProviderFlags& flags, const std::string& replay) {
  const auto provider_config = flags.config();
  std::shared_ptr<sdeval::CompletionProvider> provider;
  if (replay.empty())
    provider = std::make_shared<sdeval::OpenAiClient>(provider_config);
  else
    provider = std::make_shared<sdeval::ReplayProvider>(replay);
  auto registry = std::make_shared<sdeval::EngineRegistry>(sdeval::make_default_registry(provider, provider_config));
  auto router = std::make_shared<sdeval::Router>(registry, sdeval::service_options_for(provider_config));
  const auto [host, port] = sdeval::parse_listen_address(addr);

  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  sdeval::Server server(router);
  const int bound = server.bind(host, port);
  std::cerr << "sd-eval: serving on " << host << ":" << bound << "\n";
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    server.stop();
  });
  server.serve();
  // serve() can also end on its own; make sure the waiter exits.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal-map evaluation harness"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run suites against an engine and print a report");
  std::string suite = "all", engine = "default", replay, record, out = "-", format = "markdown", label;
  std::uint64_t seed = 0;
  std::size_t concurrency = 1;
  ProviderFlags run_flags;
  run->add_option("--suite", suite, "causal, conformance or all")->capture_default_str();
  run->add_option("--engine", engine, "Engine name")->capture_default_str();
  run_flags.attach(run);
  run->add_option("--seed", seed, "Suite seed")->capture_default_str();
  run->add_option("--concurrency", concurrency, "Parallel tests")->capture_default_str();
  run->add_option("--replay", replay, "Answer from transcripts in DIR; no network");
  run->add_option("--record", record, "Write a transcript per provider exchange to DIR");
  run->add_option("--out", out, "Report path, - for stdout")->capture_default_str();
  run->add_option("--format", format, "json, csv or markdown")->capture_default_str();
  run->add_option("--label", label, "Model name shown in the report");

  // suites export
  auto* suites_cmd = app.add_subcommand("suites", "Benchmark suite files");
  suites_cmd->require_subcommand(1);
  auto* export_cmd = suites_cmd->add_subcommand("export", "Write the canonical suites as JSON");
  std::string export_out = "-";
  std::uint64_t export_seed = 0;
  export_cmd->add_option("--out", export_out, "Output path, - for stdout")->capture_default_str();
  export_cmd->add_option("--seed", export_seed, "Suite seed")->capture_default_str();

  // fixtures verify
  auto* fixtures_cmd = app.add_subcommand("fixtures", "Failure-log fixtures");
  fixtures_cmd->require_subcommand(1);
  auto* verify_cmd = fixtures_cmd->add_subcommand("verify", "Rescore every fixture and compare");
  std::string fixture_file = std::string(SDEVAL_DATA_DIR) + "/failure_log_fixtures.json";
  verify_cmd->add_option("--file", fixture_file, "Fixture file")->capture_default_str();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve the engines over HTTP");
  const char* env_addr = std::getenv("SD_EVAL_ADDR");
  std::string addr = env_addr && *env_addr ? env_addr : "127.0.0.1:8080";
  std::string serve_replay;
  ProviderFlags serve_flags;
  serve_cmd->add_option("--addr", addr, "HOST:PORT (env SD_EVAL_ADDR)")->capture_default_str();
  serve_flags.attach(serve_cmd);
  serve_cmd->add_option("--replay", serve_replay, "Answer LLM engines from transcripts in DIR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) {
      sdeval::RunConfig config;
      config.suites = suites_from_flag(suite);
      config.engine = engine;
      config.provider = run_flags.config();
      config.seed = seed;
      config.concurrency = concurrency;
      if (!replay.empty()) config.replay_dir = replay;
      if (!record.empty()) config.record_dir = record;
      if (!label.empty()) config.label = label;
      const auto report_format = sdeval::parse_report_format(format);
      const auto report = sdeval::run_suite(config);
      write_output(out, sdeval::render_report(report, report_format));
      const auto errored = report.errored_ids();
      if (!errored.empty()) {
        std::cerr << "sd-eval: " << errored.size() << " test(s) errored\n";
        return kErrored;
      }
      return kOk;
    }
    if (*export_cmd) {
      write_output(export_out, sdeval::to_json(sdeval::canonical_suites(export_seed)).dump(2) + "\n");
      return kOk;
    }
    if (*verify_cmd) {
      const auto summary = sdeval::verify_fixtures(fixture_file);
      for (const auto& r : summary.results) {
        std::cout << (r.ok() ? "ok    " : "FAIL  ") << r.id << "  "
                  << (r.actual ? sdeval::to_string(*r.actual) : std::string_view("pass")) << "\n";
        if (!r.ok()) std::cout << "      " << r.detail << "\n";
      }
      std::cout << summary.passed() << "/" << summary.results.size() << " fixtures reproduced\n";
      return summary.ok() ? kOk : kErrored;
    }
    if (*serve_cmd) return serve(addr, serve_flags, serve_replay);
  } catch (const sdeval::ConfigError& e) {
    std::cerr << "sd-eval: configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "sd-eval: " << e.what() << "\n";
    return kErrored;
  }
  return kOk;
}
