#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "gantry/cluster.hpp"
#include "gantry/job_log.hpp"
#include "json.hpp"

namespace gantry {

enum class JobStatus { kQueued, kRunning, kSuccess, kError };

std::string_view to_string(JobStatus s);
inline bool terminal(JobStatus s) { return s == JobStatus::kSuccess || s == JobStatus::kError; }

struct Job {
  std::int64_t id = 0;
  std::string op;
  nlohmann::json params;
  /// Object the job acts on, for "Waiting for job N for <target>".
  std::string target;
  JobStatus status = JobStatus::kQueued;
  std::vector<LogLine> log;
  nlohmann::json result;
  std::string error;
  std::string error_code;
};

/// `after` skips that many log lines (long-poll continuation).
nlohmann::json job_to_json(const Job& job, const SimClock& clock, std::size_t after = 0);

struct OpHandler {
  /// Precondition check against the current state; throws Error.
  std::function<void(const Cluster&, const nlohmann::json&)> validate;
  std::function<nlohmann::json(Cluster&, JobLog&, const nlohmann::json&)> execute;
  std::function<std::string(const nlohmann::json&)> target;
};

class OpRegistry {
 public:
  void add(std::string name, OpHandler handler);
  /// Throws kUnknownOp.
  const OpHandler& find(const std::string& name) const;
  bool contains(const std::string& name) const { return ops_.count(name) != 0; }

 private:
  std::map<std::string, OpHandler> ops_;
};

/// Every cluster and lab operation, keyed by op name.
OpRegistry default_ops();

/// Job engine: numbered FIFO queue drained by one executor thread that holds
/// the cluster write lock for the duration of each job. Reads take the lock
/// shared.
class Service {
 public:
  explicit Service(std::unique_ptr<Cluster> cluster,
                   std::optional<std::filesystem::path> state_dir = std::nullopt,
                   OpRegistry ops = default_ops());
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Validates, then queues. Validation failures throw and queue nothing.
  std::int64_t submit(const std::string& op, const nlohmann::json& params);
  /// Queues all ops with consecutive ids, or none of them.
  std::vector<std::int64_t> submit_batch(
      const std::vector<std::pair<std::string, nlohmann::json>>& ops);

  /// Throws kUnknownJob.
  Job job(std::int64_t id) const;
  std::vector<Job> jobs() const;

  /// Blocks until the job is terminal, it has more than `after` log lines,
  /// or `timeout` passes (wall clock).
  Job wait(std::int64_t id, std::size_t after = 0,
           std::optional<std::chrono::milliseconds> timeout = std::nullopt) const;
  Job wait_terminal(std::int64_t id) const;

  template <typename F>
  auto read(F&& f) const {
    std::shared_lock lock(cluster_mutex_);
    return f(static_cast<const Cluster&>(*cluster_));
  }

  const SimClock& clock() const { return cluster_->world().clock(); }

 private:
  void run();
  void execute(std::int64_t id);

  std::unique_ptr<Cluster> cluster_;
  std::optional<std::filesystem::path> state_dir_;
  OpRegistry ops_;

  mutable std::shared_mutex cluster_mutex_;

  mutable std::mutex jobs_mutex_;
  mutable std::condition_variable jobs_cv_;
  std::map<std::int64_t, Job> jobs_;
  std::deque<std::int64_t> queue_;
  std::int64_t next_id_ = 1;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace gantry
