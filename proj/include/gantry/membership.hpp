#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gantry/allocator.hpp"
#include "gantry/cluster.hpp"
#include "gantry/job_log.hpp"
#include "gantry/os_catalog.hpp"

namespace gantry {

struct InitRequest {
  std::string cluster_name;
  /// Machine that becomes the master.
  std::string node;
  std::string master_netdev = std::string(kMgmtBridge);
  std::vector<std::string> enabled_hypervisors{"kvm"};
  std::string default_nic_link = std::string(kPublicBridge);
  std::string vg_name = std::string(kDefaultVgName);
  int candidate_pool_size = 10;
};

void check_cluster_init(const Cluster& cluster, const InitRequest& req);
void cluster_init(Cluster& cluster, JobLog& log, const InitRequest& req);

/// "kvm:kernel_path=,initrd_path=,vnc_bind_address=0.0.0.0"
struct HvParamsSpec {
  std::string hypervisor;
  std::vector<std::pair<std::string, std::string>> values;
};

HvParamsSpec parse_hv_params_spec(std::string_view text);
void check_modify_hvparams(const Cluster& cluster, const std::string& spec);
void cluster_modify_hvparams(Cluster& cluster, JobLog& log, const std::string& spec);

struct NodeAddRequest {
  std::string name;
  /// Node the command is issued on; defaults to the master.
  std::optional<std::string> issued_on;
};

void check_node_add(const Cluster& cluster, const NodeAddRequest& req);
void node_add(Cluster& cluster, JobLog& log, const NodeAddRequest& req);

/// Credential rotation banner shown before a node joins.
std::string node_add_banner(const std::string& node);

struct Finding {
  std::string check;
  std::string object;
  std::string message;

  bool operator==(const Finding&) const = default;
};

/// Cluster-scope verification (first of the two verify jobs).
std::vector<Finding> verify_cluster(Cluster& cluster, JobLog& log);
/// Group-scope verification (second job).
std::vector<Finding> verify_group(Cluster& cluster, JobLog& log);

/// Volumes on member nodes that no disk references.
std::vector<LvRef> orphan_volumes(const Cluster& cluster);

struct MasterFailoverRequest {
  /// Candidate taking over.
  std::string node;
};

void check_master_failover(const Cluster& cluster, const MasterFailoverRequest& req);
void master_failover(Cluster& cluster, JobLog& log, const MasterFailoverRequest& req);

struct CopyResult {
  std::vector<std::string> copied;
  std::vector<std::string> failed;
};

void check_copyfile(const Cluster& cluster, const std::string& path);
CopyResult cluster_copyfile(Cluster& cluster, JobLog& log, const std::string& path);

}  // namespace gantry
