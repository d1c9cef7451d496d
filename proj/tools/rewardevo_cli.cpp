#include <signal.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "rewardevo/gen/llm.hpp"
#include "rewardevo/store/report.hpp"
#include "rewardevo/store/run_store.hpp"
#include "rewardevo/store/server.hpp"

namespace fs = std::filesystem;
using namespace rewardevo;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kTransport = 3 };

std::string timestamp_id(const std::string& env) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  ::localtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return std::string(buf) + "-" + env;
}

fs::path locate_run(const std::string& id, const std::string& root) {
  if (fs::exists(fs::path(id) / "config.json")) return id;
  return fs::path(root) / id;
}

std::string score_text(const json& v) { return v.is_number() ? fmt::format("{:.4f}", v.get<double>()) : "failed"; }

void log_event(const evo::Event& e) {
  const auto& d = e.data;
  switch (e.type) {
    case evo::EventType::run_started:
      spdlog::info("run {} on {} started", d["run_id"].get<std::string>(), d["env"].get<std::string>());
      break;
    case evo::EventType::proposals_requested:
      spdlog::info("restart {} iteration {}: requesting {} proposals", d["restart"].get<int>(),
                   d["iteration"].get<int>(), d["k"].get<int>());
      break;
    case evo::EventType::candidate_scored:
      spdlog::debug("  sample {} -> {}", d["sample"].get<int>(), score_text(d["score"]));
      break;
    case evo::EventType::iteration_closed:
      spdlog::info("restart {} iteration {}: best {}", d["restart"].get<int>(), d["iteration"].get<int>(),
                   score_text(d["best_score"]));
      break;
    case evo::EventType::feedback_attached:
      spdlog::info("human feedback attached");
      break;
    case evo::EventType::run_failed:
      spdlog::error("run failed: {}", d["error"].get<std::string>());
      break;
    case evo::EventType::run_finished:
      spdlog::info("final score {}", score_text(d["final"].is_object() ? d["final"]["score"] : json(nullptr)));
      break;
    default:
      break;
  }
}

int outcome(const evo::RunRecord& record, const fs::path& dir) {
  switch (record.status()) {
    case evo::RunStatus::finished:
      std::cout << fmt::format("{} finished; best program in {}\n", record.run_id(),
                               (store::RunPaths{dir}.artifacts() / "best.reward").string());
      return kOk;
    case evo::RunStatus::paused_for_feedback:
      std::cout << fmt::format("{} is waiting for feedback; send it with `rewardevo feedback {}` or the API\n",
                               record.run_id(), record.run_id());
      return kOk;
    case evo::RunStatus::failed:
      std::cerr << "run failed: " << record.failure() << "\n";
      return kTransport;
    case evo::RunStatus::running:
      break;
  }
  return kOther;
}

store::RunConfig prepare(const std::string& path, const std::string& run_id, const std::string& out_dir) {
  auto cfg = store::load_run_config(path);
  if (!run_id.empty()) cfg.run_id = run_id;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (cfg.run_id.empty()) cfg.run_id = timestamp_id(cfg.env);
  const auto& key_env = cfg.generator.llm.api_key_env;
  if (cfg.generator.kind == "llm" && !key_env.empty() && std::getenv(key_env.c_str()) == nullptr) {
    spdlog::warn("{} is not set; requests go out without an API key", key_env);
  }
  return cfg;
}

int cmd_run(store::RunConfig cfg) {
  const fs::path dir = fs::path(cfg.out_dir) / cfg.run_id;
  spdlog::info("writing to {}", dir.string());
  return outcome(store::start_run(cfg, log_event), dir);
}

std::optional<std::pair<std::string, int>> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) return std::nullopt;
  try {
    return std::make_pair(bind.substr(0, colon), std::stoi(bind.substr(colon + 1)));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

int cmd_serve(const std::string& root, const std::string& bind) {
  const auto addr = parse_bind(bind);
  if (!addr) {
    std::cerr << "--bind expects host:port\n";
    return kConfig;
  }
  if (!fs::is_directory(root)) {
    std::cerr << "store root " << root << " does not exist\n";
    return kConfig;
  }
  // SIGINT and SIGTERM are taken by a waiting thread so the server stops cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  store::ApiServer server(root);
  const int port = server.bind(addr->first, addr->second);
  spdlog::info("serving {} on http://{}:{}", root, addr->first, port);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("stopping");
    server.stop();
  });
  server.serve();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  server.wait_idle();
  return kOk;
}

int cmd_report(const std::string& id, const std::vector<std::string>& compare, const std::string& root,
               bool as_json, const store::ReportOptions& options) {
  std::vector<json> reports;
  std::vector<std::string> ids{id};
  ids.insert(ids.end(), compare.begin(), compare.end());
  for (const auto& run_id : ids) {
    const fs::path dir = locate_run(run_id, root);
    const auto run = store::load_run(dir);
    for (const auto& w : run.warnings) spdlog::warn("{}", w);
    spdlog::info("building report for {}", run.record.run_id());
    auto report = store::build_report(run, options);
    std::ofstream(store::RunPaths{dir}.artifacts() / "report.json") << report.dump(2) << "\n";
    reports.push_back(std::move(report));
  }
  json out = reports.size() == 1 ? reports.front() : json{{"reports", reports}, {"comparison", store::compare_reports(reports)}};
  if (as_json) {
    std::cout << out.dump(2) << "\n";
    return kOk;
  }
  for (const auto& r : reports) std::cout << store::render_report(r) << "\n";
  if (reports.size() > 1) std::cout << store::render_comparison(out["comparison"]);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("rewardevo"));
  spdlog::set_pattern("%H:%M:%S %^%l%$ %v");

  CLI::App app{"Evolutionary reward program search"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log every candidate score");

  std::string config_path;
  std::string run_id;
  std::string out_dir;
  std::string root = "runs";

  auto* run = app.add_subcommand("run", "Start a search from a config file");
  run->add_option("--config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--run-id", run_id, "Overrides the config's run_id");
  run->add_option("--out-dir", out_dir, "Overrides the config's out_dir");

  auto* hf = app.add_subcommand("hf", "Start a human-feedback search that pauses after every iteration");
  hf->add_option("--config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
  hf->add_option("--run-id", run_id, "Overrides the config's run_id");
  hf->add_option("--out-dir", out_dir, "Overrides the config's out_dir");

  auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
  resume->add_option("run_id", run_id, "Run id or run directory")->required();
  resume->add_option("--root", root, "Store root")->capture_default_str();

  std::string text;
  std::string text_file;
  auto* feedback = app.add_subcommand("feedback", "Give feedback to a paused run and run the next iteration");
  feedback->add_option("run_id", run_id, "Run id or run directory")->required();
  feedback->add_option("--root", root, "Store root")->capture_default_str();
  auto* text_opt = feedback->add_option("--text", text, "Feedback text");
  feedback->add_option("--file", text_file, "Read the feedback from a file")->excludes(text_opt);

  std::vector<std::string> compare;
  bool as_json = false;
  bool no_baselines = false;
  bool no_correlation = false;
  auto* report = app.add_subcommand("report", "Metrics for one run, optionally compared with others");
  report->add_option("run_id", run_id, "Run id or run directory")->required();
  report->add_option("--compare", compare, "Further runs to compare against");
  report->add_option("--root", root, "Store root")->capture_default_str();
  report->add_flag("--json", as_json, "Print the JSON document instead of the table");
  report->add_flag("--no-baselines", no_baselines, "Skip training the human and sparse baselines");
  report->add_flag("--no-correlation", no_correlation, "Skip the correlation with the human reward");

  std::string bind = "127.0.0.1:8765";
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API over a store root");
  serve->add_option("--root", root, "Store root")->capture_default_str();
  serve->add_option("--bind", bind, "host:port")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*run) return cmd_run(prepare(config_path, run_id, out_dir));
    if (*hf) {
      auto cfg = prepare(config_path, run_id, out_dir);
      cfg.evolution.mode = evo::SearchMode::human_feedback;
      cfg.evolution.restarts = 1;
      cfg.evolution.samples = 1;
      cfg.evolution.validate();
      return cmd_run(cfg);
    }
    if (*resume) {
      const auto dir = locate_run(run_id, root);
      return outcome(store::resume_run(dir, log_event), dir);
    }
    if (*feedback) {
      if (!text_file.empty()) {
        std::ifstream in(text_file);
        if (!in) throw evo::ConfigError("cannot read " + text_file);
        text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
      }
      if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw evo::ConfigError("feedback text is empty");
      const auto dir = locate_run(run_id, root);
      return outcome(store::feedback_step(dir, text, log_event), dir);
    }
    if (*report) return cmd_report(run_id, compare, root, as_json, {!no_baselines, !no_correlation});
    if (*serve) return cmd_serve(root, bind);
  } catch (const evo::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const gen::TransportError& e) {
    spdlog::error("generator transport failure: {}", e.what());
    return kTransport;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kOther;
  }
  return kOther;
}
