#pragma once

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "rewardevo/store/run_store.hpp"
#include "support/search_fixtures.hpp"

namespace test_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "rewardevo") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline rewardevo::store::RunConfig tiny_run(const std::filesystem::path& out_dir, const std::string& run_id,
                                            std::uint64_t seed = 1) {
  rewardevo::store::RunConfig cfg;
  cfg.env = "pointmass_reach";
  cfg.evolution = tiny_search(seed);
  cfg.out_dir = out_dir.string();
  cfg.run_id = run_id;
  return cfg;
}

// Forwards to a writer and kills the process right after the n-th durable
// append.
class KillAfterSink final : public rewardevo::evo::EventSink {
 public:
  KillAfterSink(rewardevo::evo::EventSink& inner, int n) : inner_(inner), remaining_(n) {}
  void append(rewardevo::evo::Event& event) override {
    inner_.append(event);
    if (--remaining_ == 0) ::kill(::getpid(), SIGKILL);
  }

 private:
  rewardevo::evo::EventSink& inner_;
  int remaining_;
};

// Runs cfg in a child process that is SIGKILLed after `kill_after` events.
// Returns true if the child died from the signal.
inline bool run_and_kill(const rewardevo::store::RunConfig& cfg, int kill_after) {
  using namespace rewardevo;
  const pid_t pid = ::fork();
  if (pid == 0) {
    try {
      const auto paths = store::create_run_dir(cfg);
      store::RunWriter writer(paths.dir);
      KillAfterSink sink(writer, kill_after);
      auto services = store::make_services(cfg);
      evo::run_search(cfg.run_id, cfg.env, cfg.evolution, {*services.generator, *services.evaluator, sink});
    } catch (...) {
      ::_exit(2);
    }
    ::_exit(0);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  return WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL;
}

// Appends half of a plausible event line without a newline, as a crash in
// the middle of a write would leave it.
inline void tear_record(const std::filesystem::path& run_dir) {
  std::ofstream out(rewardevo::store::RunPaths{run_dir}.record(), std::ios::binary | std::ios::app);
  out << R"({"seq":999,"type":"candidate_sco)";
}

}  // namespace test_support
