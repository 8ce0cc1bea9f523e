#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gantry/allocator.hpp"
#include "gantry/cluster.hpp"
#include "gantry/job_log.hpp"
#include "json.hpp"

namespace gantry {

/// Simulated time a node RPC takes to fail against an unreachable node.
inline constexpr Millis kRpcTimeout{3000};

struct InstanceAddRequest {
  std::string name;
  DiskTemplate disk_template = DiskTemplate::kPlain;
  std::string os;
  std::vector<MiB> disks;
  BeParams be;
  std::map<std::string, std::string> hv;
  bool start = true;
  bool name_check = true;
  bool ip_check = true;
  /// Primary node chosen by the operator instead of the allocator.
  std::optional<std::string> node;
  std::optional<std::string> nic_link;
  std::optional<std::string> nic_ip;
};

struct InstanceAddResult {
  std::string primary;
  std::optional<std::string> secondary;
  int network_port = 0;
  std::string uuid;
};

struct StartRequest {
  std::string name;
  /// One-off hypervisor parameters for this boot; not stored.
  std::map<std::string, std::string> hv;
};

struct NicModifyRequest {
  std::string name;
  int nic_index = 0;
  std::optional<std::string> link;
  bool hotplug = false;
};

struct NicModifyResult {
  /// "nic.link/0 -> br-man"
  std::vector<std::string> changes;
  bool hotplugged = false;
};

struct FailoverRequest {
  std::string name;
  bool ignore_consistency = false;
};

/// Validation runs both at submission and again inside the job, so a
/// failing precondition is reported before anything is queued.
void check_instance_add(const Cluster& cluster, const InstanceAddRequest& req);
InstanceAddResult instance_add(Cluster& cluster, JobLog& log, const InstanceAddRequest& req);

void check_instance_start(const Cluster& cluster, const StartRequest& req);
void instance_start(Cluster& cluster, JobLog& log, const StartRequest& req);

void check_instance_shutdown(const Cluster& cluster, const std::string& name);
void instance_shutdown(Cluster& cluster, JobLog& log, const std::string& name);

void check_modify_nic(const Cluster& cluster, const NicModifyRequest& req);
NicModifyResult modify_nic(Cluster& cluster, JobLog& log, const NicModifyRequest& req);

void check_migrate(const Cluster& cluster, const std::string& name);
void migrate(Cluster& cluster, JobLog& log, const std::string& name);

void check_failover(const Cluster& cluster, const FailoverRequest& req);
void failover(Cluster& cluster, JobLog& log, const FailoverRequest& req);

/// Structured `gnt-instance info` report.
nlohmann::json instance_info(const Cluster& cluster, const std::string& name);

/// "running", "ADMIN_down", "ERROR_down", "ERROR_up".
std::string instance_status(const Cluster& cluster, const InstanceRecord& inst);

struct Table {
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;
};

inline const std::vector<std::string> kDefaultListFields = {"name", "primary_node",
                                                            "secondary_nodes", "status"};

/// kUnknownField names the first bad field.
Table instance_list(const Cluster& cluster,
                    const std::vector<std::string>& fields = kDefaultListFields);

/// Effective hypervisor value for the instance, before one-off overrides.
std::string instance_hv_value(const ClusterConfig& config, const InstanceRecord& inst,
                              const std::string& key);

}  // namespace gantry
