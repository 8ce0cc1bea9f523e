#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gantry/job_log.hpp"
#include "gantry/sim_clock.hpp"

namespace gantry {

class SimWorld;

inline constexpr int kFirstNetworkPort = 11000;
/// DRBD module option minor_count.
inline constexpr int kMaxDrbdMinors = 128;
inline constexpr std::string_view kMacPrefix = "aa:00:00";
inline constexpr std::string_view kConfigDataPath = "/var/lib/ganeti/config.data";
inline constexpr int kNodeDaemonPort = 1811;
inline constexpr std::string_view kDefaultGroup = "default";

enum class NodeRole { kMaster, kMasterCandidate, kRegular };
enum class AdminState { kUp, kDown };
enum class DiskTemplate { kPlain, kDrbd };

std::string_view to_string(NodeRole r);
NodeRole parse_node_role(std::string_view s);
std::string_view to_string(AdminState s);
AdminState parse_admin_state(std::string_view s);
std::string_view to_string(DiskTemplate t);
DiskTemplate parse_disk_template(std::string_view s);

struct NodeRecord {
  std::string name;
  std::string uuid;
  std::string mgmt_ip;
  NodeRole role = NodeRole::kRegular;
  bool offline = false;
  MiB vg_total = 0;
  MiB mtotal = 0;
  MiB mnode = 0;
  int minor_counter = 0;
};

struct NicSpec {
  std::string mac;
  std::optional<std::string> ip;
  std::string mode = "bridged";
  std::string link;
  std::string uuid;
  std::optional<std::string> name;
};

/// Reference from a disk to one of its backing logical volumes.
struct LvRef {
  std::string node;
  std::string vg;
  std::string lv_name;

  bool operator==(const LvRef&) const = default;
  auto operator<=>(const LvRef&) const = default;
};

struct DiskSpec {
  std::string uuid;
  DiskTemplate disk_template = DiskTemplate::kPlain;
  MiB size = 0;
  std::string access = "rw";
  // drbd only
  std::string node_a;
  std::string node_b;
  int minor_a = -1;
  int minor_b = -1;
  int port = 0;
  std::string auth_key;
  std::vector<LvRef> children;

  int minor_on(const std::string& node) const { return node == node_a ? minor_a : minor_b; }
};

/// Backend parameters. Unset fields fall back to the cluster defaults.
struct BeParams {
  std::optional<MiB> minmem;
  std::optional<MiB> maxmem;
  std::optional<int> vcpus;
  std::optional<bool> auto_balance;
  std::optional<int> spindle_use;
};

struct EffectiveBeParams {
  MiB minmem = 128;
  MiB maxmem = 128;
  int vcpus = 1;
  bool auto_balance = true;
  int spindle_use = 1;
};

EffectiveBeParams effective(const BeParams& be);

/// Parses "minmem=256M,maxmem=512M". "memory" sets both bounds.
BeParams parse_be_params(std::string_view text);
/// "4G" -> 4096, "256M" -> 256, bare numbers are MiB.
MiB parse_size(std::string_view text);

struct InstanceRecord {
  std::string name;
  std::string uuid;
  std::int64_t serial = 1;
  Millis ctime{0};
  Millis mtime{0};
  AdminState admin_state = AdminState::kDown;
  std::string primary_node;
  std::vector<std::string> secondary_nodes;
  std::string os_spec;
  std::string hypervisor = "kvm";
  std::map<std::string, std::string> hv_overrides;
  BeParams be_params;
  std::vector<NicSpec> nics;
  DiskTemplate disk_template = DiskTemplate::kPlain;
  std::vector<DiskSpec> disks;
  int network_port = 0;

  MiB maxmem() const { return effective(be_params).maxmem; }
  std::optional<std::string> secondary() const {
    if (secondary_nodes.empty()) return std::nullopt;
    return secondary_nodes.front();
  }
};

/// Replicated cluster configuration document.
struct ClusterConfig {
  std::string cluster_name;
  std::string master_node;
  std::string master_netdev;
  std::vector<std::string> enabled_hypervisors;
  /// hypervisor -> key -> value; an empty value means cleared.
  std::map<std::string, std::map<std::string, std::string>> hypervisor_params;
  std::string default_nic_link;
  std::string vg_name;
  int port_counter = kFirstNetworkPort;
  std::int64_t config_serial = 0;
  std::map<std::string, std::string> hosts;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_draws = 0;
  std::string group_uuid;
  int candidate_pool_size = 10;
  bool ssl_cert_present = true;

  /// Disk resync rate, MiB/s, and the create-time progress interval.
  double sync_rate = 11.5;
  double sync_report_every = 60.0;
  /// Live-migration memory copy rate, MiB/s, and its progress interval.
  double migration_rate = 11.0;
  double migration_report_every = 10.0;

  std::map<std::string, NodeRecord> nodes;
  std::map<std::string, InstanceRecord> instances;

  // Not part of the document: job attribution for each serial bump.
  std::int64_t active_job = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> serial_audit;

  NodeRecord& node(const std::string& name);
  const NodeRecord& node(const std::string& name) const;
  bool has_node(const std::string& name) const { return nodes.count(name) != 0; }
  InstanceRecord& instance(const std::string& name);
  const InstanceRecord& instance(const std::string& name) const;
  bool has_instance(const std::string& name) const { return instances.count(name) != 0; }

  /// Nodes that hold a config copy: the master and master candidates.
  std::vector<std::string> config_holders() const;
  bool hypervisor_enabled(std::string_view hv) const;

  void bump_serial();
};

/// Next free TCP port from the shared counter (console and DRBD ports).
int allocate_network_port(ClusterConfig& config);

/// Next free DRBD minor on `node`; kMinorsExhausted at 128.
int allocate_drbd_minor(ClusterConfig& config, const std::string& node);

enum class IdentityKind { kMac, kUuid, kAuthKey };

/// Seeded, counter-based identity generation: the same seed and call order
/// always yields the same sequence.
std::string generate_identity(ClusterConfig& config, IdentityKind kind);
/// MAC with the cluster prefix, unique among all NICs.
std::string generate_unique_mac(ClusterConfig& config);

struct DistributionResult {
  std::string node;
  bool ok = false;

  bool operator==(const DistributionResult&) const = default;
};

/// Pushes the current snapshot to every config holder. Unreachable targets
/// are reported (and logged as warnings to `log`), never raised.
std::vector<DistributionResult> distribute_config(const ClusterConfig& config, SimWorld& world,
                                                  JobLog* log);

/// "Error 7: Failed connect to <ip>:1811; No route to host"
std::string no_route_error(const std::string& ip);

/// Built-in kvm parameter defaults.
const std::map<std::string, std::string>& kvm_defaults();
/// Cluster-level effective value of a hypervisor parameter.
std::string cluster_hv_value(const ClusterConfig& config, const std::string& hv,
                             const std::string& key);

}  // namespace gantry
