#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rewardevo/evo/record.hpp"
#include "rewardevo/evo/search.hpp"
#include "rewardevo/store/run_config.hpp"

namespace rewardevo::store {

// I/O failures, corrupt logs and lock conflicts.
class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LockError : public StoreError {
 public:
  using StoreError::StoreError;
};

// Layout of one run directory.
struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config() const { return dir / "config.json"; }
  std::filesystem::path record() const { return dir / "record.jsonl"; }
  std::filesystem::path lock() const { return dir / "writer.lock"; }
  std::filesystem::path artifacts() const { return dir / "artifacts"; }
};

struct EventLog {
  std::vector<evo::Event> events;
  std::vector<std::string> warnings;  // e.g. a dropped torn final line
};

// Parses record.jsonl. An unterminated or unparseable final line is dropped
// with a warning; a bad line anywhere else throws StoreError.
EventLog read_event_log(const std::filesystem::path& record_path);

struct LoadedRun {
  RunConfig config;
  evo::RunRecord record;
  std::vector<std::string> warnings;
};

// Reads config.json and replays record.jsonl. Replay violations surface as
// evo::RecordError.
LoadedRun load_run(const std::filesystem::path& run_dir);

// Called after each durable append.
using EventObserver = std::function<void(const evo::Event&)>;

// The single writer of a run. Holds an exclusive lock on writer.lock for its
// lifetime; a second writer gets LockError. Opening drops a torn final line
// so appends continue after the last complete event.
class RunWriter final : public evo::EventSink {
 public:
  explicit RunWriter(const std::filesystem::path& run_dir);
  ~RunWriter() override;
  RunWriter(const RunWriter&) = delete;
  RunWriter& operator=(const RunWriter&) = delete;

  // Assigns seq = last + 1, writes one line and fsyncs before returning.
  void append(evo::Event& event) override;
  std::uint64_t last_seq() const noexcept { return last_seq_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  void set_observer(EventObserver observer) { observer_ = std::move(observer); }

 private:
  RunPaths paths_;
  int lock_fd_ = -1;
  int record_fd_ = -1;
  std::uint64_t last_seq_ = 0;
  std::vector<std::string> warnings_;
  EventObserver observer_;
};

// Creates <out_dir>/<run_id>/ with config.json. Throws StoreError if the
// directory already holds a record.
RunPaths create_run_dir(const RunConfig& cfg);

// Derived files under artifacts/: the best program, every candidate program
// and its feedback, and a summary. Safe to regenerate at any time.
void write_artifacts(const std::filesystem::path& run_dir, const evo::RunRecord& record);

// Starts the run in its own directory and drives it until it finishes, fails
// or pauses for feedback.
evo::RunRecord start_run(const RunConfig& cfg, const EventObserver& observer = {});
// Continues an interrupted or failed run.
evo::RunRecord resume_run(const std::filesystem::path& run_dir, const EventObserver& observer = {});
// Attaches human feedback to a paused run and drives it to the next pause.
evo::RunRecord feedback_step(const std::filesystem::path& run_dir, const std::string& text,
                             const EventObserver& observer = {});

}  // namespace rewardevo::store
