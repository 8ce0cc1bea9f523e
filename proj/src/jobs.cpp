#include "gantry/jobs.hpp"

#include "gantry/error.hpp"
#include "gantry/serialize.hpp"

namespace gantry {

using nlohmann::json;

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::kQueued:
      return "queued";
    case JobStatus::kRunning:
      return "running";
    case JobStatus::kSuccess:
      return "success";
    case JobStatus::kError:
      return "error";
  }
  return "?";
}

json job_to_json(const Job& job, const SimClock& clock, std::size_t after) {
  json lines = json::array();
  for (std::size_t i = after; i < job.log.size(); ++i) {
    const LogLine& l = job.log[i];
    lines.push_back({{"at_ms", l.at.count()},
                     {"time", clock.log_time(l.at)},
                     {"level", to_string(l.level)},
                     {"text", l.text},
                     {"rendered", render_log_line(clock, l)}});
  }
  json out = {{"id", job.id},
              {"op", job.op},
              {"params", job.params},
              {"target", job.target},
              {"status", to_string(job.status)},
              {"log_offset", after},
              {"log_size", job.log.size()},
              {"log", lines},
              {"result", job.result}};
  if (job.status == JobStatus::kError) {
    out["error"] = job.error;
    out["error_code"] = job.error_code;
  }
  return out;
}

void OpRegistry::add(std::string name, OpHandler handler) { ops_[std::move(name)] = std::move(handler); }

const OpHandler& OpRegistry::find(const std::string& name) const {
  auto it = ops_.find(name);
  if (it == ops_.end()) throw Error(ErrorCode::kUnknownOp, "Unknown operation '" + name + "'");
  return it->second;
}

Service::Service(std::unique_ptr<Cluster> cluster, std::optional<std::filesystem::path> state_dir,
                 OpRegistry ops)
    : cluster_(std::move(cluster)), state_dir_(std::move(state_dir)), ops_(std::move(ops)) {
  worker_ = std::thread([this] { run(); });
}

Service::~Service() {
  {
    std::lock_guard lock(jobs_mutex_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  worker_.join();
}

std::int64_t Service::submit(const std::string& op, const json& params) {
  return submit_batch({{op, params}}).front();
}

std::vector<std::int64_t> Service::submit_batch(const std::vector<std::pair<std::string, json>>& ops) {
  std::vector<std::string> targets;
  {
    std::shared_lock lock(cluster_mutex_);
    for (const auto& [op, params] : ops) {
      const OpHandler& h = ops_.find(op);
      if (h.validate) h.validate(*cluster_, params);
      targets.push_back(h.target ? h.target(params) : std::string());
    }
  }
  std::vector<std::int64_t> ids;
  {
    std::lock_guard lock(jobs_mutex_);
    for (std::size_t i = 0; i < ops.size(); ++i) {
      Job job;
      job.id = next_id_++;
      job.op = ops[i].first;
      job.params = ops[i].second;
      job.target = targets[i];
      ids.push_back(job.id);
      queue_.push_back(job.id);
      jobs_[job.id] = std::move(job);
    }
  }
  jobs_cv_.notify_all();
  return ids;
}

Job Service::job(std::int64_t id) const {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::kUnknownJob, "Job " + std::to_string(id) + " not found");
  return it->second;
}

std::vector<Job> Service::jobs() const {
  std::lock_guard lock(jobs_mutex_);
  std::vector<Job> out;
  for (const auto& [id, j] : jobs_) out.push_back(j);
  return out;
}

Job Service::wait(std::int64_t id, std::size_t after,
                  std::optional<std::chrono::milliseconds> timeout) const {
  std::unique_lock lock(jobs_mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::kUnknownJob, "Job " + std::to_string(id) + " not found");
  auto ready = [&] {
    const Job& j = jobs_.at(id);
    return terminal(j.status) || j.log.size() > after;
  };
  if (timeout) {
    jobs_cv_.wait_for(lock, *timeout, ready);
  } else {
    jobs_cv_.wait(lock, ready);
  }
  return jobs_.at(id);
}

Job Service::wait_terminal(std::int64_t id) const {
  std::unique_lock lock(jobs_mutex_);
  if (jobs_.count(id) == 0) throw Error(ErrorCode::kUnknownJob, "Job " + std::to_string(id) + " not found");
  jobs_cv_.wait(lock, [&] { return terminal(jobs_.at(id).status); });
  return jobs_.at(id);
}

void Service::run() {
  for (;;) {
    std::int64_t id = 0;
    {
      std::unique_lock lock(jobs_mutex_);
      jobs_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      id = queue_.front();
      queue_.pop_front();
      jobs_.at(id).status = JobStatus::kRunning;
    }
    jobs_cv_.notify_all();
    execute(id);
  }
}

void Service::execute(std::int64_t id) {
  std::string op;
  json params;
  {
    std::lock_guard lock(jobs_mutex_);
    op = jobs_.at(id).op;
    params = jobs_.at(id).params;
  }

  std::unique_lock write(cluster_mutex_);
  JobLog log(cluster_->world().clock(), [this, id](const LogLine& line) {
    {
      std::lock_guard lock(jobs_mutex_);
      jobs_.at(id).log.push_back(line);
    }
    jobs_cv_.notify_all();
  });

  JobStatus status = JobStatus::kSuccess;
  json result;
  std::string error;
  std::string code;
  cluster_->set_active_job(id);
  try {
    const OpHandler& h = ops_.find(op);
    result = h.execute(*cluster_, log, params);
    cluster_->commit(&log);
  } catch (const Error& e) {
    status = JobStatus::kError;
    error = e.what();
    code = std::string(e.name());
    cluster_->commit(&log);
  } catch (const std::exception& e) {
    status = JobStatus::kError;
    error = e.what();
    code = "internal-error";
  }
  cluster_->set_active_job(0);
  if (state_dir_) {
    try {
      save_state(*cluster_, *state_dir_);
    } catch (const std::exception& e) {
      log.warning(std::string("Could not save state: ") + e.what());
    }
  }
  write.unlock();

  {
    std::lock_guard lock(jobs_mutex_);
    Job& j = jobs_.at(id);
    j.status = status;
    j.result = std::move(result);
    j.error = std::move(error);
    j.error_code = std::move(code);
  }
  jobs_cv_.notify_all();
}

}  // namespace gantry
