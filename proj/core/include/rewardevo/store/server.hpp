#pragma once

#include <filesystem>
#include <memory>
#include <string>

namespace rewardevo::store {

// Local JSON API over a store root (one subdirectory per run).
//
//   GET  /api/runs
//   GET  /api/runs/{id}
//   GET  /api/runs/{id}/iterations/{n}       n: flat index in record order
//   GET  /api/runs/{id}/events?since=S&timeout=T
//   POST /api/runs/{id}/feedback             {"text": "..."}
//
// The events endpoint long-polls for up to T seconds (at most 60) until an
// event with seq > S exists. Feedback is accepted only for runs paused for
// feedback: it is recorded before the 202 response and the next iteration
// runs on a background thread.
class ApiServer {
 public:
  explicit ApiServer(std::filesystem::path root);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds without serving; port 0 picks a free port. Returns the bound port
  // or throws std::runtime_error.
  int bind(const std::string& host, int port);
  // Serves until stop(). Requires bind().
  void serve();
  void stop();
  // Blocks until no feedback step is running.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rewardevo::store
