#include "rewardevo/store/server.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rewardevo/store/run_store.hpp"
#include "rewardevo/store/views.hpp"

namespace rewardevo::store {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kMaxPollSeconds = 60.0;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

bool valid_run_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9_][A-Za-z0-9._-]*");
  return std::regex_match(id, pattern);
}

}  // namespace

struct ApiServer::Impl {
  fs::path root;
  httplib::Server server;
  bool bound = false;

  std::mutex mutex;
  std::condition_variable idle;
  std::set<std::string> busy;
  std::vector<std::thread> workers;

  explicit Impl(fs::path r) : root(std::move(r)) { routes(); }

  std::optional<fs::path> run_dir(const std::string& id) const {
    if (!valid_run_id(id)) return std::nullopt;
    fs::path dir = root / id;
    if (!fs::is_regular_file(RunPaths{dir}.config())) return std::nullopt;
    return dir;
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      } catch (...) {
        send_error(res, 500, "unknown error");
      }
    });
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server.Get("/api/runs", [this](const httplib::Request&, httplib::Response& res) {
      json runs = json::array();
      if (fs::is_directory(root)) {
        std::vector<fs::path> dirs;
        for (const auto& entry : fs::directory_iterator(root)) {
          if (entry.is_directory() && run_dir(entry.path().filename().string())) dirs.push_back(entry.path());
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& dir : dirs) {
          try {
            runs.push_back(run_list_entry(load_run(dir).record));
          } catch (const std::exception& e) {
            runs.push_back({{"run_id", dir.filename().string()}, {"status", "unreadable"}, {"error", e.what()}});
          }
        }
      }
      send_json(res, 200, {{"runs", runs}});
    });

    server.Get(R"(/api/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto dir = run_dir(req.matches[1]);
      if (!dir) return send_error(res, 404, "unknown run");
      auto run = load_run(*dir);
      json body = run_summary(run.record);
      body["busy"] = is_busy(req.matches[1]);
      send_json(res, 200, body);
    });

    server.Get(R"(/api/runs/([^/]+)/iterations/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto dir = run_dir(req.matches[1]);
      if (!dir) return send_error(res, 404, "unknown run");
      std::size_t n = 0;
      try {
        n = std::stoul(req.matches[2]);
      } catch (const std::exception&) {
        return send_error(res, 404, "unknown iteration");
      }
      auto view = iteration_view(load_run(*dir).record, n);
      if (!view) return send_error(res, 404, "unknown iteration");
      send_json(res, 200, *view);
    });

    server.Get(R"(/api/runs/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto dir = run_dir(req.matches[1]);
      if (!dir) return send_error(res, 404, "unknown run");
      std::uint64_t since = 0;
      double timeout = 0.0;
      try {
        if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
        if (req.has_param("timeout")) timeout = std::stod(req.get_param_value("timeout"));
      } catch (const std::exception&) {
        return send_error(res, 400, "since and timeout must be numbers");
      }
      timeout = std::clamp(timeout, 0.0, kMaxPollSeconds);
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout);
      const RunPaths paths{*dir};
      for (;;) {
        auto log = read_event_log(paths.record());
        json events = json::array();
        for (const auto& e : log.events) {
          if (e.seq > since) events.push_back(e.to_json());
        }
        if (!events.empty() || std::chrono::steady_clock::now() >= deadline) {
          const auto record = evo::RunRecord::replay(log.events);
          return send_json(res, 200,
                           {{"events", events},
                            {"last_seq", record.last_seq()},
                            {"status", evo::to_string(record.status())},
                            {"busy", is_busy(req.matches[1])}});
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
      }
    });

    server.Post(R"(/api/runs/([^/]+)/feedback)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto dir = run_dir(id);
      if (!dir) return send_error(res, 404, "unknown run");
      if (req.get_header_value("Content-Type").rfind("application/json", 0) != 0) {
        return send_error(res, 415, "content type must be application/json");
      }
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error&) {
        return send_error(res, 400, "body is not valid JSON");
      }
      if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
        return send_error(res, 400, "body must be an object with a string field \"text\"");
      }
      const std::string text = body["text"].get<std::string>();
      if (text.find_first_not_of(" \t\r\n") == std::string::npos) return send_error(res, 400, "feedback text is empty");
      accept_feedback(id, *dir, text, res);
    });
  }

  bool is_busy(const std::string& id) {
    std::lock_guard lock(mutex);
    return busy.count(id) != 0;
  }

  void accept_feedback(const std::string& id, const fs::path& dir, const std::string& text, httplib::Response& res) {
    {
      std::lock_guard lock(mutex);
      if (!busy.insert(id).second) return send_error(res, 409, "run is busy with the previous feedback");
    }
    auto release = [this, id] {
      std::lock_guard lock(mutex);
      busy.erase(id);
      idle.notify_all();
    };
    std::unique_ptr<RunWriter> writer;
    try {
      writer = std::make_unique<RunWriter>(dir);
    } catch (const LockError& e) {
      release();
      return send_error(res, 409, e.what());
    }
    LoadedRun run;
    std::uint64_t seq = 0;
    try {
      run = load_run(dir);
      if (run.record.status() != evo::RunStatus::paused_for_feedback) {
        release();
        return send_error(res, 409, "run not awaiting feedback (status " +
                                        std::string(evo::to_string(run.record.status())) + ")");
      }
      run.record = evo::attach_human_feedback(std::move(run.record), text, *writer);
      seq = run.record.last_seq();
    } catch (...) {
      release();
      throw;
    }

    std::lock_guard lock(mutex);
    workers.emplace_back([dir, release, writer = std::move(writer), run = std::move(run)]() mutable {
      try {
        auto services = make_services(run.config);
        auto record =
            evo::resume_search(std::move(run.record), {*services.generator, *services.evaluator, *writer});
        write_artifacts(dir, record);
      } catch (const std::exception&) {
        // The record already holds whatever the step managed to append.
      }
      writer.reset();
      release();
    });
    send_json(res, 202, {{"run_id", id}, {"seq", seq}, {"status", "running"}});
  }

  void join_workers() {
    std::vector<std::thread> done;
    {
      std::lock_guard lock(mutex);
      done.swap(workers);
    }
    for (auto& t : done) t.join();
  }
};

ApiServer::ApiServer(fs::path root) : impl_(std::make_unique<Impl>(std::move(root))) {}

ApiServer::~ApiServer() {
  stop();
  impl_->join_workers();
}

int ApiServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return bound;
}

void ApiServer::serve() {
  if (!impl_->bound) throw std::logic_error("ApiServer::serve called before bind");
  impl_->server.listen_after_bind();
}

void ApiServer::stop() { impl_->server.stop(); }

void ApiServer::wait_idle() {
  {
    std::unique_lock lock(impl_->mutex);
    impl_->idle.wait(lock, [&] { return impl_->busy.empty(); });
  }
  impl_->join_workers();
}

}  // namespace rewardevo::store
