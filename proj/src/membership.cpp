#include "gantry/membership.hpp"

#include <algorithm>
#include <set>

#include "gantry/error.hpp"
#include "gantry/lifecycle.hpp"

namespace gantry {
namespace {

bool known_hypervisor(std::string_view hv) { return hv == "kvm"; }

void add_finding(std::vector<Finding>& out, JobLog& log, std::string check, std::string object,
                 std::string message) {
  log.warning(object + ": " + message);
  out.push_back({std::move(check), std::move(object), std::move(message)});
}

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void check_cluster_init(const Cluster& cluster, const InitRequest& req) {
  if (cluster.initialized()) {
    throw Error(ErrorCode::kAlreadyInitialized,
                "Cluster is already initialised (master " + cluster.config().master_node + ")");
  }
  if (req.cluster_name.empty() || !cluster.world().resolve(req.cluster_name)) {
    throw Error(ErrorCode::kNameUnresolvable,
                "Cluster name '" + req.cluster_name + "' does not resolve");
  }
  if (!cluster.world().has_node(req.node)) {
    throw Error(ErrorCode::kUnknownNode, "Unknown node '" + req.node + "'");
  }
  if (!cluster.world().reachable(req.node)) {
    throw Error(ErrorCode::kUnreachableNode, "Node " + req.node + " is not reachable");
  }
  if (req.enabled_hypervisors.empty()) {
    throw Error(ErrorCode::kUnknownHypervisor, "At least one hypervisor must be enabled");
  }
  for (const auto& hv : req.enabled_hypervisors) {
    if (!known_hypervisor(hv)) throw Error(ErrorCode::kUnknownHypervisor, "Unknown hypervisor '" + hv + "'");
  }
  for (const auto& link : {req.master_netdev, req.default_nic_link}) {
    if (!is_known_bridge(link)) throw Error(ErrorCode::kUnknownLink, "Unknown link '" + link + "'");
  }
  if (!cluster.storage().find_vg(req.node, req.vg_name)) {
    throw Error(ErrorCode::kVgMissing,
                "Volume group '" + req.vg_name + "' not found on node " + req.node);
  }
  if (req.candidate_pool_size < 1) {
    throw Error(ErrorCode::kInvalidParams, "candidate_pool_size must be at least 1");
  }
}

void cluster_init(Cluster& cluster, JobLog& log, const InitRequest& req) {
  check_cluster_init(cluster, req);
  ClusterConfig c;
  c.cluster_name = req.cluster_name;
  c.master_node = req.node;
  c.master_netdev = req.master_netdev;
  c.enabled_hypervisors = req.enabled_hypervisors;
  for (const auto& hv : req.enabled_hypervisors) c.hypervisor_params[hv];
  c.default_nic_link = req.default_nic_link;
  c.vg_name = req.vg_name;
  c.candidate_pool_size = req.candidate_pool_size;
  c.hosts = cluster.world().hosts();
  c.rng_seed = cluster.seed();
  c.group_uuid = generate_identity(c, IdentityKind::kUuid);

  const SimNode& sim = cluster.world().node(req.node);
  NodeRecord rec;
  rec.name = req.node;
  rec.uuid = generate_identity(c, IdentityKind::kUuid);
  rec.mgmt_ip = sim.ip;
  rec.role = NodeRole::kMaster;
  rec.vg_total = cluster.storage().vg(req.node, req.vg_name).total;
  rec.mtotal = sim.mtotal;
  rec.mnode = sim.mnode;
  c.nodes[rec.name] = rec;
  c.active_job = cluster.active_job();
  c.bump_serial();
  cluster.set_config(std::move(c));
  cluster.commit(&log);
  log.info("Cluster " + req.cluster_name + " initialized with master " + req.node);
}

HvParamsSpec parse_hv_params_spec(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(ErrorCode::kParseError,
                "Invalid hypervisor parameter spec '" + std::string(text) + "', expected hv:key=value,...");
  }
  HvParamsSpec spec;
  spec.hypervisor = trim(text.substr(0, colon));
  std::string_view rest = text.substr(colon + 1);
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    std::size_t comma = rest.find(',', pos);
    if (comma == std::string_view::npos) comma = rest.size();
    std::string_view item = rest.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) {
      if (comma == rest.size()) break;
      continue;
    }
    auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw Error(ErrorCode::kParseError, "Missing value in hypervisor parameter '" + std::string(item) + "'");
    }
    spec.values.emplace_back(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
  if (spec.values.empty()) throw Error(ErrorCode::kParseError, "No hypervisor parameters given");
  return spec;
}

void check_modify_hvparams(const Cluster& cluster, const std::string& text) {
  const ClusterConfig& config = cluster.config();
  HvParamsSpec spec = parse_hv_params_spec(text);
  if (!known_hypervisor(spec.hypervisor) || !config.hypervisor_enabled(spec.hypervisor)) {
    throw Error(ErrorCode::kUnknownHypervisor,
                "Hypervisor '" + spec.hypervisor + "' is not enabled in this cluster");
  }
  for (const auto& [key, value] : spec.values) {
    if (kvm_defaults().count(key) == 0) {
      throw Error(ErrorCode::kInvalidParams, "Unknown hypervisor parameter '" + key + "'");
    }
  }
}

void cluster_modify_hvparams(Cluster& cluster, JobLog& log, const std::string& text) {
  check_modify_hvparams(cluster, text);
  ClusterConfig& config = cluster.config();
  HvParamsSpec spec = parse_hv_params_spec(text);
  auto& params = config.hypervisor_params[spec.hypervisor];
  for (const auto& [key, value] : spec.values) params[key] = value;
  config.bump_serial();
  cluster.commit(&log);
}

std::string node_add_banner(const std::string& node) {
  return "-- WARNING --\n"
         "Performing this operation is going to replace the ssh daemon keypair\n"
         "on the target machine (" +
         node +
         ") with the ones of the current one\n"
         "and grant full intra-cluster ssh root access to/from it\n";
}

void check_node_add(const Cluster& cluster, const NodeAddRequest& req) {
  const ClusterConfig& config = cluster.config();
  const std::string issued = req.issued_on.value_or(config.master_node);
  if (issued != config.master_node) {
    throw Error(ErrorCode::kNotMaster, "This command must be run on the master node (" +
                                           config.master_node + "), not " + issued);
  }
  if (config.has_node(req.name)) {
    throw Error(ErrorCode::kDuplicateNode, "Node " + req.name + " is already in the cluster");
  }
  if (!cluster.world().resolve(req.name)) {
    throw Error(ErrorCode::kNameUnresolvable, "Node name '" + req.name + "' does not resolve");
  }
  if (!cluster.world().has_node(req.name) || !cluster.world().reachable(req.name)) {
    throw Error(ErrorCode::kUnreachableNode,
                "Node " + req.name + " is not reachable: " +
                    no_route_error(*cluster.world().resolve(req.name)));
  }
}

void node_add(Cluster& cluster, JobLog& log, const NodeAddRequest& req) {
  check_node_add(cluster, req);
  ClusterConfig& config = cluster.config();
  SimNode& sim = cluster.world().node(req.name);
  sim.credentials = generate_identity(config, IdentityKind::kAuthKey);

  int candidates = 0;
  for (const auto& [n, rec] : config.nodes) {
    if (rec.role != NodeRole::kRegular) ++candidates;
  }
  NodeRecord rec;
  rec.name = req.name;
  rec.uuid = generate_identity(config, IdentityKind::kUuid);
  rec.mgmt_ip = sim.ip;
  rec.role = candidates < config.candidate_pool_size ? NodeRole::kMasterCandidate : NodeRole::kRegular;
  if (const VolumeGroup* vg = cluster.storage().find_vg(req.name, config.vg_name)) rec.vg_total = vg->total;
  rec.mtotal = sim.mtotal;
  rec.mnode = sim.mnode;
  config.nodes[rec.name] = rec;
  config.bump_serial();
  cluster.commit(&log);
  if (rec.role == NodeRole::kMasterCandidate) log.info("Node will be a master candidate");
}

std::vector<LvRef> orphan_volumes(const Cluster& cluster) {
  const ClusterConfig& config = cluster.config();
  std::set<LvRef> referenced;
  for (const auto& [name, inst] : config.instances) {
    for (const auto& d : inst.disks) referenced.insert(d.children.begin(), d.children.end());
  }
  std::vector<LvRef> out;
  for (const auto& [key, lv] : cluster.storage().lvs()) {
    if (!config.has_node(lv.node)) continue;
    LvRef ref{lv.node, lv.vg, lv.lv_name};
    if (referenced.count(ref) == 0) out.push_back(ref);
  }
  return out;
}

std::vector<Finding> verify_cluster(Cluster& cluster, JobLog& log) {
  const ClusterConfig& config = cluster.config();
  std::vector<Finding> out;

  log.step("* Verifying cluster config");
  int masters = 0;
  for (const auto& [name, rec] : config.nodes) {
    if (rec.role == NodeRole::kMaster) ++masters;
  }
  if (masters != 1) {
    add_finding(out, log, "config", "cluster", std::to_string(masters) + " nodes have the master role");
  }
  if (!config.has_node(config.master_node) ||
      config.node(config.master_node).role != NodeRole::kMaster) {
    add_finding(out, log, "config", "cluster", "master node " + config.master_node + " is not a master");
  }
  for (const auto& [name, inst] : config.instances) {
    if (!config.has_node(inst.primary_node)) {
      add_finding(out, log, "config", "instance " + name, "primary node " + inst.primary_node + " unknown");
    }
    for (const auto& s : inst.secondary_nodes) {
      if (!config.has_node(s)) add_finding(out, log, "config", "instance " + name, "secondary node " + s + " unknown");
    }
  }

  log.step("* Verifying cluster certificate files");
  if (!config.ssl_cert_present) {
    add_finding(out, log, "certificates", "cluster", "cluster certificate file is missing");
  }

  log.step("* Verifying hypervisor parameters");
  for (const auto& [hv, params] : config.hypervisor_params) {
    if (!config.hypervisor_enabled(hv)) {
      add_finding(out, log, "hvparams", "cluster", "parameters given for disabled hypervisor " + hv);
    }
    for (const auto& [key, value] : params) {
      if (kvm_defaults().count(key) == 0) {
        add_finding(out, log, "hvparams", "cluster", "unknown hypervisor parameter " + key);
      }
    }
  }
  for (const auto& [name, inst] : config.instances) {
    for (const auto& [key, value] : inst.hv_overrides) {
      if (kvm_defaults().count(key) == 0) {
        add_finding(out, log, "hvparams", "instance " + name, "unknown hypervisor parameter " + key);
      }
    }
  }

  log.step("* Verifying all nodes belong to an existing group");
  return out;
}

std::vector<Finding> verify_group(Cluster& cluster, JobLog& log) {
  const ClusterConfig& config = cluster.config();
  std::vector<Finding> out;
  const std::string n = std::to_string(config.nodes.size());

  log.step("* Verifying group '" + std::string(kDefaultGroup) + "'");
  log.step("* Gathering data (" + n + " nodes)");
  log.step("* Gathering disk information (" + n + " nodes)");

  log.step("* Verifying configuration file consistency");
  for (const auto& holder : config.config_holders()) {
    if (!cluster.world().reachable(holder)) continue;
    std::int64_t have = cluster.world().node(holder).config_serial;
    if (have != config.config_serial) {
      add_finding(out, log, "config-consistency", "node " + holder,
                  "configuration file is out of date (serial " + std::to_string(have) +
                      ", expected " + std::to_string(config.config_serial) + ")");
    }
  }

  log.step("* Verifying node status");
  std::optional<OsCatalog> reference;
  if (cluster.world().reachable(config.master_node)) {
    reference = node_os_catalog(cluster.world().node(config.master_node));
  }
  for (const auto& [name, rec] : config.nodes) {
    if (rec.offline) {
      add_finding(out, log, "node-status", "node " + name, "node is marked offline");
      continue;
    }
    if (!cluster.world().reachable(name)) {
      add_finding(out, log, "node-status", "node " + name,
                  "node is unreachable: " + no_route_error(rec.mgmt_ip));
      continue;
    }
    if (!cluster.storage().find_vg(name, config.vg_name)) {
      add_finding(out, log, "node-status", "node " + name, "volume group " + config.vg_name + " missing");
    }
    if (reference && node_os_catalog(cluster.world().node(name)) != *reference) {
      add_finding(out, log, "node-status", "node " + name, "OS definitions differ from the master node");
    }
  }

  log.step("* Verifying instance status");
  for (const auto& [name, inst] : config.instances) {
    bool running = cluster.instance_running(inst);
    if (inst.admin_state == AdminState::kUp && !running) {
      add_finding(out, log, "instance-status", "instance " + name,
                  "instance not running on its primary node " + inst.primary_node);
    } else if (inst.admin_state == AdminState::kDown && running) {
      add_finding(out, log, "instance-status", "instance " + name, "instance should not be running");
    }
    for (std::size_t i = 0; i < inst.disks.size(); ++i) {
      const DiskSpec& d = inst.disks[i];
      if (d.disk_template != DiskTemplate::kDrbd) continue;
      const DrbdPair& p = cluster.storage().pair(d.uuid);
      if (!p.up_to_date() || !p.all_connected()) {
        add_finding(out, log, "instance-status", "instance " + name,
                    "disk/" + std::to_string(i) + " is degraded (" + p.describe() + ")");
      }
    }
  }

  log.step("* Verifying orphan volumes");
  for (const auto& ref : orphan_volumes(cluster)) {
    add_finding(out, log, "orphan-volumes", "node " + ref.node,
                "volume " + ref.vg + "/" + ref.lv_name + " is unknown");
  }

  log.step("* Verifying N+1 Memory redundancy");
  for (const auto& v : check_n_plus_one(cluster)) {
    add_finding(out, log, "n+1", "node " + v.failed_node,
                "not enough memory to accommodate instance failovers should this node fail (" +
                    std::to_string(v.overflow) + " MiB short)");
  }

  log.step("* Other Notes");
  log.step("* Hooks Results");
  return out;
}

void check_master_failover(const Cluster& cluster, const MasterFailoverRequest& req) {
  const ClusterConfig& config = cluster.config();
  const NodeRecord& rec = config.node(req.node);
  if (req.node == config.master_node || cluster.world().reachable(config.master_node)) {
    throw Error(ErrorCode::kMasterStillAlive,
                "Master node " + config.master_node + " is still alive");
  }
  if (rec.role != NodeRole::kMasterCandidate) {
    throw Error(ErrorCode::kNotACandidate, "Node " + req.node + " is not a master candidate");
  }
  if (!cluster.world().reachable(req.node)) {
    throw Error(ErrorCode::kUnreachableNode, "Node " + req.node + " is not reachable");
  }
  std::int64_t have = cluster.world().node(req.node).config_serial;
  if (have != config.config_serial) {
    throw Error(ErrorCode::kStaleConfig, "Node " + req.node + " holds configuration serial " +
                                             std::to_string(have) + ", latest is " +
                                             std::to_string(config.config_serial));
  }
}

void master_failover(Cluster& cluster, JobLog& log, const MasterFailoverRequest& req) {
  check_master_failover(cluster, req);
  ClusterConfig& config = cluster.config();
  NodeRecord& old_master = config.node(config.master_node);
  old_master.role = NodeRole::kMasterCandidate;
  old_master.offline = true;
  config.node(req.node).role = NodeRole::kMaster;
  config.master_node = req.node;
  config.bump_serial();
  cluster.commit(&log);
  log.info("Node " + req.node + " is now the master");
}

void check_copyfile(const Cluster& cluster, const std::string& path) {
  const ClusterConfig& config = cluster.config();
  if (!cluster.world().reachable(config.master_node)) {
    throw Error(ErrorCode::kUnreachableNode, "Master node " + config.master_node + " is not reachable");
  }
  if (!cluster.world().node(config.master_node).has_file(path)) {
    throw Error(ErrorCode::kFileMissingOnMaster,
                "File " + path + " does not exist on the master node " + config.master_node);
  }
}

CopyResult cluster_copyfile(Cluster& cluster, JobLog& log, const std::string& path) {
  check_copyfile(cluster, path);
  const ClusterConfig& config = cluster.config();
  const std::string content = cluster.world().node(config.master_node).files.at(path);
  CopyResult out;
  for (const auto& [name, rec] : config.nodes) {
    if (name == config.master_node) continue;
    if (!cluster.world().reachable(name)) {
      log.warning("Copy of file " + path + " to node " + name + " failed: " + no_route_error(rec.mgmt_ip));
      out.failed.push_back(name);
      continue;
    }
    cluster.world().node(name).files[path] = content;
    out.copied.push_back(name);
  }
  return out;
}

}  // namespace gantry
