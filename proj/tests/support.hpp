#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gantry/api.hpp"
#include "gantry/cli.hpp"
#include "gantry/cluster.hpp"
#include "gantry/jobs.hpp"
#include "gantry/lab.hpp"
#include "gantry/lifecycle.hpp"
#include "gantry/membership.hpp"
#include "gantry/scenario.hpp"

namespace gantry::testing {

inline const std::string kNode1 = "node1.project.edu";
inline const std::string kNode2 = "node2.project.edu";
inline const std::string kNode3 = "node3.project.edu";
inline const std::string kTestvm = "testvm.project.edu";

/// Runs one library operation the way the job engine does: under a job id,
/// with its own log.
class JobRunner {
 public:
  explicit JobRunner(Cluster& cluster) : cluster_(cluster) {}

  template <typename F>
  JobLog run(F&& f) {
    JobLog log(cluster_.world().clock());
    cluster_.set_active_job(++next_id_);
    try {
      f(log);
    } catch (...) {
      cluster_.set_active_job(0);
      throw;
    }
    cluster_.set_active_job(0);
    return log;
  }

  std::int64_t last_id() const { return next_id_; }

 private:
  Cluster& cluster_;
  std::int64_t next_id_ = 0;
};

/// Lab machines racked, cluster initialized on node1, the first `members`
/// lab nodes joined.
std::unique_ptr<Cluster> make_lab_cluster(int members = 3, std::uint64_t seed = 1);

/// cd variant on the master, copied everywhere, plus the install ISO.
void install_cd_and_iso(Cluster& cluster, JobRunner& jobs);

InstanceAddRequest drbd_request(const std::string& name, MiB size, MiB maxmem);
InstanceAddRequest plain_request(const std::string& name, MiB size, MiB maxmem,
                                 std::optional<std::string> node = std::nullopt);

/// The three instances of the walkthrough: firstvm (plain, node3), second
/// (drbd), testvm (drbd 4G, 256M..512M, started from the ISO).
void add_walkthrough_instances(Cluster& cluster, JobRunner& jobs);

/// Text of every log line, in order.
std::vector<std::string> log_texts(const JobLog& log);
std::vector<std::string> log_texts(const std::vector<LogLine>& lines);

struct CliRun {
  int rc = 0;
  std::string out;
  std::string err;
};

/// A job engine over an in-process router, as gantryd runs it.
class Daemon {
 public:
  explicit Daemon(std::unique_ptr<Cluster> cluster);
  /// Fresh lab machines, nothing initialized.
  static std::unique_ptr<Daemon> lab();

  Service& service() { return *service_; }
  const ApiRouter& router() const { return *router_; }
  ApiClient& client() { return *client_; }

  /// One CLI invocation; `answer` is what the operator types at prompts.
  CliRun cli(const std::vector<std::string>& argv, const std::string& answer = "y\n");
  ApiResponse get(const std::string& path, const Query& q = {}) { return client_->get(path, q); }
  ApiResponse post(const std::string& path, const nlohmann::json& body) { return client_->post(path, body); }
  /// POST that yields one job; waits for it and returns it.
  Job post_and_wait(const std::string& path, const nlohmann::json& body);
  void advance(double seconds);
  std::int64_t now_ms();

 private:
  std::unique_ptr<Service> service_;
  std::unique_ptr<ApiRouter> router_;
  std::unique_ptr<InProcessClient> client_;
};

/// Scenario steps run one at a time against a daemon, with the clock
/// origin fixed at construction so steps can be interleaved with checks.
class ScenarioDriver {
 public:
  explicit ScenarioDriver(Daemon& daemon);

  /// Moves the clock to the step's time and runs it through the CLI.
  CliRun run(const ScenarioStep& step);

 private:
  Daemon& daemon_;
  std::int64_t origin_ms_;
};

std::vector<ScenarioStep> load_scenario(const std::string& path);

/// Path of a file under tests/scenarios.
std::string scenario_path(const std::string& name);

}  // namespace gantry::testing
