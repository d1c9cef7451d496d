#include "rewardevo/store/run_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <functional>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace rewardevo::store {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string errno_text() { return std::strerror(errno); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Scan {
  std::vector<evo::Event> events;
  std::vector<std::string> warnings;
  std::size_t valid_bytes = 0;  // prefix made of complete, parseable lines
};

Scan scan_log(const std::string& text, const std::string& name) {
  Scan scan;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const auto nl = text.find('\n', pos);
    const bool last = nl == std::string::npos || nl + 1 == text.size();
    const std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    try {
      if (nl == std::string::npos) throw StoreError("unterminated line");
      scan.events.push_back(evo::Event::from_json(json::parse(line)));
    } catch (const std::exception& e) {
      if (!last) throw StoreError(fmt::format("{}: line {} is corrupt: {}", name, line_no, e.what()));
      scan.warnings.push_back(fmt::format("{}: dropped torn final line {} ({} bytes)", name, line_no, line.size()));
      return scan;
    }
    pos = nl + 1;
    scan.valid_bytes = pos;
  }
  return scan;
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    const auto n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StoreError("write to " + path.string() + " failed: " + errno_text());
    }
    done += static_cast<std::size_t>(n);
  }
}

void write_file_atomic(const fs::path& path, const std::string& data) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out << data;
    if (!out.flush()) throw StoreError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string candidate_stem(const evo::CandidateRef& ref) {
  return fmt::format("r{}_i{}_s{}", ref.restart, ref.iteration, ref.sample);
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

EventLog read_event_log(const fs::path& record_path) {
  if (!fs::exists(record_path)) return {};
  auto scan = scan_log(read_file(record_path), record_path.filename().string());
  return {std::move(scan.events), std::move(scan.warnings)};
}

LoadedRun load_run(const fs::path& run_dir) {
  const RunPaths paths{run_dir};
  if (!fs::is_directory(run_dir)) throw StoreError("no run directory at " + run_dir.string());
  LoadedRun run;
  run.config = load_run_config(paths.config());
  auto log = read_event_log(paths.record());
  run.record = evo::RunRecord::replay(log.events);
  run.warnings = std::move(log.warnings);
  return run;
}

RunWriter::RunWriter(const fs::path& run_dir) : paths_{run_dir} {
  if (!fs::is_directory(run_dir)) throw StoreError("no run directory at " + run_dir.string());
  lock_fd_ = ::open(paths_.lock().c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw StoreError("cannot open " + paths_.lock().string() + ": " + errno_text());
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    const bool busy = errno == EWOULDBLOCK;
    const std::string why = errno_text();
    ::close(lock_fd_);
    if (busy) throw LockError("run " + run_dir.filename().string() + " is locked by another writer");
    throw StoreError("cannot lock " + paths_.lock().string() + ": " + why);
  }
  record_fd_ = ::open(paths_.record().c_str(), O_CREAT | O_RDWR | O_APPEND | O_CLOEXEC, 0644);
  if (record_fd_ < 0) {
    ::close(lock_fd_);
    throw StoreError("cannot open " + paths_.record().string() + ": " + errno_text());
  }
  try {
    const std::string text = read_file(paths_.record());
    auto scan = scan_log(text, paths_.record().filename().string());
    if (scan.valid_bytes < text.size()) {
      if (::ftruncate(record_fd_, static_cast<off_t>(scan.valid_bytes)) != 0 || ::fsync(record_fd_) != 0) {
        throw StoreError("cannot truncate " + paths_.record().string() + ": " + errno_text());
      }
    }
    last_seq_ = scan.events.empty() ? 0 : scan.events.back().seq;
    warnings_ = std::move(scan.warnings);
  } catch (...) {
    ::close(record_fd_);
    ::close(lock_fd_);
    throw;
  }
}

RunWriter::~RunWriter() {
  if (record_fd_ >= 0) ::close(record_fd_);
  if (lock_fd_ >= 0) ::close(lock_fd_);  // releases the flock
}

void RunWriter::append(evo::Event& event) {
  event.seq = last_seq_ + 1;
  write_all(record_fd_, event.to_json().dump() + "\n", paths_.record());
  if (::fdatasync(record_fd_) != 0) throw StoreError("fsync of " + paths_.record().string() + " failed: " + errno_text());
  last_seq_ = event.seq;
  if (observer_) observer_(event);
}

RunPaths create_run_dir(const RunConfig& cfg) {
  if (cfg.run_id.empty()) throw StoreError("run_id must be set before creating the run directory");
  const RunPaths paths{fs::path(cfg.out_dir) / cfg.run_id};
  if (fs::exists(paths.record()) && fs::file_size(paths.record()) > 0) {
    throw StoreError("run directory " + paths.dir.string() + " already holds a record");
  }
  fs::create_directories(paths.dir);
  RunConfig stored = cfg;
  if (!stored.generator.fixture.empty()) stored.generator.fixture = fs::absolute(stored.generator.fixture).string();
  if (!stored.generator.llm.capture_path.empty()) {
    stored.generator.llm.capture_path = fs::absolute(stored.generator.llm.capture_path).string();
  }
  write_file_atomic(paths.config(), to_json(stored).dump(2) + "\n");
  return paths;
}

void write_artifacts(const fs::path& run_dir, const evo::RunRecord& record) {
  const RunPaths paths{run_dir};
  const fs::path dir = paths.artifacts();
  json iterations = json::array();
  for (const auto& it : record.iterations()) {
    json candidates = json::array();
    for (const auto& c : it.candidates) {
      const std::string stem = candidate_stem(c.index);
      write_file_atomic(dir / "candidates" / (stem + ".reward"), c.program_text);
      if (!c.feedback.empty()) write_file_atomic(dir / "candidates" / (stem + ".feedback.txt"), c.feedback);
      candidates.push_back({{"sample", c.index.sample}, {"score", optional_number(c.score)}, {"failed", c.failed()}});
    }
    iterations.push_back({{"restart", it.restart},
                          {"iteration", it.iteration},
                          {"closed", it.closed},
                          {"best_sample", it.best_sample ? json(*it.best_sample) : json(nullptr)},
                          {"best_score", optional_number(it.best_score)},
                          {"candidates", candidates}});
  }
  json summary = {{"run_id", record.run_id()},
                  {"env", record.env_id()},
                  {"status", to_string(record.status())},
                  {"last_seq", record.last_seq()},
                  {"iterations", iterations}};
  if (const auto& best = record.overall_best()) {
    write_file_atomic(dir / "best.reward", best->program_text);
    summary["best"] = {{"restart", best->ref.restart},
                       {"iteration", best->ref.iteration},
                       {"sample", best->ref.sample},
                       {"score", best->score}};
  }
  if (const auto& fin = record.final_score()) summary["final"] = {{"score", fin->score}, {"run_scores", fin->run_scores}};
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
}

namespace {

evo::RunRecord drive(const fs::path& run_dir, const RunConfig& cfg, RunWriter& writer,
                     const std::function<evo::RunRecord(evo::SearchServices)>& step) {
  auto services = make_services(cfg);
  evo::RunRecord record = step({*services.generator, *services.evaluator, writer});
  write_artifacts(run_dir, record);
  return record;
}

}  // namespace

evo::RunRecord start_run(const RunConfig& cfg, const EventObserver& observer) {
  const auto paths = create_run_dir(cfg);
  RunWriter writer(paths.dir);
  writer.set_observer(observer);
  return drive(paths.dir, cfg, writer, [&](evo::SearchServices s) {
    return evo::run_search(cfg.run_id, cfg.env, cfg.evolution, s);
  });
}

evo::RunRecord resume_run(const fs::path& run_dir, const EventObserver& observer) {
  RunWriter writer(run_dir);
  writer.set_observer(observer);
  auto run = load_run(run_dir);
  if (run.record.events().empty()) {
    if (run.config.run_id.empty()) throw StoreError("run " + run_dir.string() + " has no run_id");
    return drive(run_dir, run.config, writer, [&](evo::SearchServices s) {
      return evo::run_search(run.config.run_id, run.config.env, run.config.evolution, s);
    });
  }
  return drive(run_dir, run.config, writer,
               [&](evo::SearchServices s) { return evo::resume_search(std::move(run.record), s); });
}

evo::RunRecord feedback_step(const fs::path& run_dir, const std::string& text, const EventObserver& observer) {
  RunWriter writer(run_dir);
  writer.set_observer(observer);
  auto run = load_run(run_dir);
  return drive(run_dir, run.config, writer, [&](evo::SearchServices s) {
    return evo::run_human_feedback_step(std::move(run.record), text, s);
  });
}

}  // namespace rewardevo::store
