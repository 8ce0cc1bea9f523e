#include "gantry/lifecycle.hpp"

#include <algorithm>
#include <cstdio>

#include "gantry/error.hpp"
#include "gantry/os_catalog.hpp"

namespace gantry {
namespace {

constexpr Millis kStepDelay{1000};

std::string shutdown_error(const std::string& ip) {
  return "Error 7: Failed to connect to " + ip + ":" + std::to_string(kNodeDaemonPort) +
         "; No route to host";
}

void touch(Cluster& cluster, InstanceRecord& inst) {
  ++inst.serial;
  inst.mtime = cluster.now();
  cluster.config().bump_serial();
}

const InstanceRecord& find_instance(const Cluster& cluster, const std::string& name) {
  return cluster.config().instance(name);
}

MiB node_mfree(const Cluster& cluster, const std::string& node) {
  const SimNode& n = cluster.world().node(node);
  return n.mtotal - n.mnode - n.mem_used;
}

void check_hv_overrides(const std::map<std::string, std::string>& hv) {
  const auto& defaults = kvm_defaults();
  for (const auto& [key, value] : hv) {
    if (defaults.count(key) == 0) {
      throw Error(ErrorCode::kInvalidParams, "Unknown hypervisor parameter '" + key + "'");
    }
    if (key == "boot_order" && !value.empty()) {
      try {
        parse_boot_order(value);
      } catch (const Error&) {
        throw Error(ErrorCode::kInvalidParams, "Invalid boot_order '" + value + "'");
      }
    }
  }
}

std::string hv_value(const ClusterConfig& config, const InstanceRecord& inst,
                     const std::map<std::string, std::string>& once, const std::string& key) {
  auto it = once.find(key);
  if (it != once.end()) return it->second;
  return instance_hv_value(config, inst, key);
}

std::string vm_address(const Cluster& cluster, const InstanceRecord& inst) {
  if (!inst.nics.empty() && inst.nics.front().ip) return *inst.nics.front().ip;
  if (auto ip = cluster.world().resolve(inst.name)) return *ip;
  return inst.name;
}

VmLaunch launch_for(const Cluster& cluster, const InstanceRecord& inst,
                    const std::map<std::string, std::string>& once) {
  const ClusterConfig& config = cluster.config();
  VmLaunch launch;
  std::string boot = hv_value(config, inst, once, "boot_order");
  launch.boot_order = boot.empty() ? BootOrder::kDisk : parse_boot_order(boot);
  std::string cdrom = hv_value(config, inst, once, "cdrom_image_path");
  if (!cdrom.empty()) launch.cdrom_path = cdrom;
  launch.console_port = inst.network_port;
  launch.memory = inst.maxmem();
  launch.bridge = inst.nics.empty() ? config.default_nic_link : inst.nics.front().link;
  launch.address = vm_address(cluster, inst);
  return launch;
}

void check_boot_media(const Cluster& cluster, const InstanceRecord& inst, const std::string& node,
                      const std::map<std::string, std::string>& once) {
  VmLaunch launch = launch_for(cluster, inst, once);
  if (launch.boot_order != BootOrder::kCdrom) return;
  if (!launch.cdrom_path || !cluster.world().node(node).has_file(*launch.cdrom_path)) {
    throw Error(ErrorCode::kMissingIsoOnNode,
                "Cdrom image " + launch.cdrom_path.value_or("(unset)") + " is not present on node " +
                    node);
  }
}

void check_memory(const Cluster& cluster, const InstanceRecord& inst, const std::string& node) {
  MiB free = node_mfree(cluster, node);
  if (free < inst.maxmem()) {
    throw Error(ErrorCode::kInsufficientMemory,
                "Not enough memory on node " + node + " for instance " + inst.name + ": needed " +
                    std::to_string(inst.maxmem()) + " MiB, available " + std::to_string(free) +
                    " MiB");
  }
}

bool disks_in_sync(const Cluster& cluster, const InstanceRecord& inst) {
  for (const auto& d : inst.disks) {
    if (d.disk_template != DiskTemplate::kDrbd) continue;
    const DrbdPair& p = cluster.storage().pair(d.uuid);
    if (!p.up_to_date() || !p.all_connected()) return false;
  }
  return true;
}

void set_mode_all(Cluster& cluster, const InstanceRecord& inst, const DrbdTransition& t) {
  for (const auto& d : inst.disks) {
    if (d.disk_template != DiskTemplate::kDrbd) continue;
    cluster.storage().set_mode(d.uuid, t, cluster.now(), cluster.active_job());
  }
}

void set_dual_primary_allowed(Cluster& cluster, const InstanceRecord& inst, bool allowed) {
  for (const auto& d : inst.disks) {
    if (d.disk_template == DiskTemplate::kDrbd) cluster.storage().pair(d.uuid).dual_primary_allowed = allowed;
  }
}

/// Advances the clock until no disk of `inst` is resyncing. With
/// `report_every` set, emits a progress line per disk at that interval and
/// a final line when each disk completes.
void wait_for_sync(Cluster& cluster, JobLog& log, const InstanceRecord& inst,
                   std::optional<Millis> report_every) {
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < inst.disks.size(); ++i) {
    if (inst.disks[i].disk_template == DiskTemplate::kDrbd) pending.push_back(i);
  }
  Millis next_report = cluster.now();
  while (!pending.empty()) {
    const bool tick = report_every && cluster.now() >= next_report;
    std::vector<std::size_t> still;
    Millis until_done{0};
    bool first = true;
    for (std::size_t i : pending) {
      const DiskSpec& d = inst.disks[i];
      const DrbdPair& p = cluster.storage().pair(d.uuid);
      ResyncReport rep = cluster.storage().resync_report(d.uuid);
      bool done = p.up_to_date();
      if (report_every && (tick || done)) {
        log.info("- device disk/" + std::to_string(i) + ": " + rep.text());
      }
      if (done) continue;
      if (!p.syncing()) {
        throw Error(ErrorCode::kDisksDegraded,
                    "Disk disk/" + std::to_string(i) + " of instance " + inst.name +
                        " stopped resyncing (" + p.describe() + ")");
      }
      still.push_back(i);
      if (first || rep.remaining < until_done) until_done = rep.remaining;
      first = false;
    }
    if (tick) next_report = cluster.now() + *report_every;
    pending = std::move(still);
    if (pending.empty()) break;
    Millis dt = until_done;
    if (report_every) dt = std::min(dt, next_report - cluster.now());
    cluster.advance(dt);
  }
}

void start_vm(Cluster& cluster, const InstanceRecord& inst, const std::string& node,
              const std::map<std::string, std::string>& once) {
  // A running guest needs its node's side of every DRBD disk primary.
  for (const auto& d : inst.disks) {
    if (d.disk_template != DiskTemplate::kDrbd) continue;
    const DrbdPair& p = cluster.storage().pair(d.uuid);
    if (p.primaries() == 0) {
      cluster.storage().set_mode(d.uuid, DrbdTransition::single_primary(node), cluster.now(), cluster.active_job());
    }
  }
  cluster.world().vm_set_state(node, inst.name, VmState::kRunning, launch_for(cluster, inst, once));
}

std::string format_percent(double p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", p);
  return buf;
}

}  // namespace

std::string instance_hv_value(const ClusterConfig& config, const InstanceRecord& inst,
                              const std::string& key) {
  auto it = inst.hv_overrides.find(key);
  if (it != inst.hv_overrides.end()) return it->second;
  return cluster_hv_value(config, inst.hypervisor, key);
}

void check_instance_add(const Cluster& cluster, const InstanceAddRequest& req) {
  const ClusterConfig& config = cluster.config();
  if (req.name.empty()) throw Error(ErrorCode::kInvalidParams, "Instance name must not be empty");
  if (config.has_instance(req.name)) {
    throw Error(ErrorCode::kDuplicateInstance,
                "Instance '" + req.name + "' is already in the cluster");
  }
  if (req.disks.empty()) throw Error(ErrorCode::kInvalidParams, "At least one disk is required");
  for (MiB d : req.disks) {
    if (d <= 0) throw Error(ErrorCode::kInvalidParams, "Disk size must be positive");
  }
  EffectiveBeParams be = effective(req.be);
  if (be.minmem > be.maxmem) {
    throw Error(ErrorCode::kInvalidParams,
                "Minimum memory (" + std::to_string(be.minmem) +
                    ") must not exceed maximum memory (" + std::to_string(be.maxmem) + ")");
  }
  if (be.maxmem <= 0 || be.vcpus <= 0) {
    throw Error(ErrorCode::kInvalidParams, "Memory and vcpus must be positive");
  }
  if (!config.hypervisor_enabled("kvm")) {
    throw Error(ErrorCode::kUnknownHypervisor, "Hypervisor kvm is not enabled");
  }
  check_hv_overrides(req.hv);
  if (req.nic_link && !is_known_bridge(*req.nic_link)) {
    throw Error(ErrorCode::kUnknownLink, "Unknown link '" + *req.nic_link + "'");
  }
  auto names = os_list(cluster);
  if (std::find(names.begin(), names.end(), req.os) == names.end()) {
    throw Error(ErrorCode::kUnknownOs, "OS '" + req.os + "' not found on all nodes");
  }
  if (req.name_check) {
    auto ip = cluster.world().resolve(req.name);
    if (!ip) {
      throw Error(ErrorCode::kNameResolutionFailed,
                  "The given name (" + req.name + ") does not resolve");
    }
    if (req.ip_check) {
      bool used = false;
      for (const auto& [n, node] : cluster.world().nodes()) {
        if (node.ip == *ip && node.reachable()) used = true;
        for (const auto& [vm_name, vm] : node.vms) {
          if (vm.state == VmState::kRunning && vm.address == *ip) used = true;
        }
      }
      if (used) throw Error(ErrorCode::kIpInUse, "IP " + *ip + " of instance " + req.name + " already in use");
    }
  }
  if (req.node) config.node(*req.node);
  select_nodes(cluster, {req.disk_template, req.disks, be.maxmem}, req.node);
}

InstanceAddResult instance_add(Cluster& cluster, JobLog& log, const InstanceAddRequest& req) {
  check_instance_add(cluster, req);
  ClusterConfig& config = cluster.config();
  EffectiveBeParams be = effective(req.be);
  Placement placement = select_nodes(cluster, {req.disk_template, req.disks, be.maxmem}, req.node);
  if (!req.node) {
    std::string nodes = placement.primary;
    if (placement.secondary) nodes += ", " + *placement.secondary;
    log.info("Selected nodes for instance " + req.name + " via iallocator hail: " + nodes);
  }
  cluster.advance(kStepDelay);

  InstanceRecord inst;
  inst.name = req.name;
  inst.uuid = generate_identity(config, IdentityKind::kUuid);
  inst.network_port = allocate_network_port(config);
  inst.primary_node = placement.primary;
  if (placement.secondary) inst.secondary_nodes.push_back(*placement.secondary);
  inst.os_spec = req.os;
  inst.hv_overrides = req.hv;
  inst.be_params = req.be;
  inst.disk_template = req.disk_template;

  log.step("* creating instance disks...");
  for (MiB size : req.disks) {
    inst.disks.push_back(provision_instance_disks(config, cluster.storage(), req.disk_template, size,
                                                  placement.primary, placement.secondary));
  }
  NicSpec nic;
  nic.mac = generate_unique_mac(config);
  nic.uuid = generate_identity(config, IdentityKind::kUuid);
  nic.ip = req.nic_ip;
  nic.link = req.nic_link.value_or(config.default_nic_link);
  inst.nics.push_back(nic);
  cluster.advance(kStepDelay);

  log.step("adding instance " + req.name + " to cluster config");
  inst.ctime = inst.mtime = cluster.now();
  config.instances[inst.name] = inst;
  config.bump_serial();
  cluster.commit(&log);
  cluster.advance(kStepDelay);

  if (req.disk_template == DiskTemplate::kDrbd) {
    log.info("Waiting for instance " + req.name + " to sync disks");
    wait_for_sync(cluster, log, config.instance(req.name),
                  seconds_to_millis(config.sync_report_every));
    log.info("Instance " + req.name + "'s disks are in sync");
  }
  log.step("* running the instance OS create scripts...");
  cluster.advance(kStepDelay);

  if (req.start) {
    log.step("* starting instance...");
    InstanceRecord& rec = config.instance(req.name);
    check_memory(cluster, rec, rec.primary_node);
    start_vm(cluster, rec, rec.primary_node, {});
    rec.admin_state = AdminState::kUp;
    touch(cluster, rec);
  }
  cluster.commit(&log);
  return {placement.primary, placement.secondary, inst.network_port, inst.uuid};
}

void check_instance_start(const Cluster& cluster, const StartRequest& req) {
  const InstanceRecord& inst = find_instance(cluster, req.name);
  check_hv_overrides(req.hv);
  if (cluster.instance_running(inst)) return;
  if (!cluster.node_online(inst.primary_node)) {
    throw Error(ErrorCode::kPrimaryOffline,
                "Primary node " + inst.primary_node + " of instance " + inst.name + " is offline");
  }
  check_boot_media(cluster, inst, inst.primary_node, req.hv);
  check_memory(cluster, inst, inst.primary_node);
}

void instance_start(Cluster& cluster, JobLog& log, const StartRequest& req) {
  check_instance_start(cluster, req);
  InstanceRecord& inst = cluster.config().instance(req.name);
  if (cluster.instance_running(inst)) {
    log.warning("Instance " + inst.name + " is already running");
  } else {
    start_vm(cluster, inst, inst.primary_node, req.hv);
  }
  if (inst.admin_state != AdminState::kUp) {
    inst.admin_state = AdminState::kUp;
    touch(cluster, inst);
  }
  cluster.commit(&log);
}

void check_instance_shutdown(const Cluster& cluster, const std::string& name) {
  find_instance(cluster, name);
}

void instance_shutdown(Cluster& cluster, JobLog& log, const std::string& name) {
  check_instance_shutdown(cluster, name);
  InstanceRecord& inst = cluster.config().instance(name);
  const std::string& node = inst.primary_node;
  if (!cluster.world().reachable(node)) {
    cluster.advance(kRpcTimeout);
    log.warning("Could not shutdown instance " + name + " on node " + node +
                ", proceeding anyway; please make sure node " + node +
                " is down; error details: " + shutdown_error(cluster.config().node(node).mgmt_ip));
  } else if (!cluster.instance_running(inst)) {
    log.warning("Instance " + name + " is already stopped");
  } else {
    cluster.world().vm_set_state(node, name, VmState::kStopped);
  }
  if (inst.admin_state != AdminState::kDown) {
    inst.admin_state = AdminState::kDown;
    touch(cluster, inst);
  }
  cluster.commit(&log);
}

void check_modify_nic(const Cluster& cluster, const NicModifyRequest& req) {
  const InstanceRecord& inst = find_instance(cluster, req.name);
  if (req.nic_index < 0 || req.nic_index >= static_cast<int>(inst.nics.size())) {
    throw Error(ErrorCode::kBadNicIndex,
                "Invalid NIC index " + std::to_string(req.nic_index) + ", instance has " +
                    std::to_string(inst.nics.size()) + " NIC(s)");
  }
  if (req.link && !is_known_bridge(*req.link)) {
    throw Error(ErrorCode::kUnknownLink, "Unknown link '" + *req.link + "'");
  }
}

NicModifyResult modify_nic(Cluster& cluster, JobLog& log, const NicModifyRequest& req) {
  check_modify_nic(cluster, req);
  InstanceRecord& inst = cluster.config().instance(req.name);
  NicSpec& nic = inst.nics[static_cast<std::size_t>(req.nic_index)];
  const std::string idx = std::to_string(req.nic_index);
  nic.link = req.link.value_or(nic.link);
  nic.mode = "bridged";
  touch(cluster, inst);

  NicModifyResult out;
  out.changes = {"nic.link/" + idx + " -> " + nic.link, "nic.mode/" + idx + " -> " + nic.mode,
                 "nic.vlan/" + idx + " ->"};
  if (req.hotplug && cluster.instance_running(inst)) {
    log.info("Trying to hotplug device...");
    // The NIC is removed and re-added: one probe goes unanswered.
    cluster.world().arm_probe_loss(inst.name);
    cluster.advance(Millis{3000});
    if (req.nic_index == 0) cluster.world().set_vm_bridge(inst.name, nic.link);
    cluster.advance(Millis{4000});
    log.info("Hotplug done.");
    cluster.world().disarm_probe_loss(inst.name);
    out.changes.push_back("nic/" + idx + " -> hotplug:done");
    out.hotplugged = true;
  }
  cluster.commit(&log);
  return out;
}

void check_migrate(const Cluster& cluster, const std::string& name) {
  const InstanceRecord& inst = find_instance(cluster, name);
  if (inst.disk_template != DiskTemplate::kDrbd) {
    throw Error(ErrorCode::kNotDrbd, "Instance " + name + " has disk template " +
                                         std::string(to_string(inst.disk_template)) +
                                         ", only drbd instances can be migrated");
  }
  for (const std::string& node : {inst.primary_node, inst.secondary().value_or("")}) {
    if (!cluster.node_online(node)) throw Error(ErrorCode::kNodeOffline, "Node " + node + " is offline");
  }
  if (!cluster.instance_running(inst)) {
    throw Error(ErrorCode::kInstanceNotRunning, "Instance " + name + " is not running");
  }
  if (!disks_in_sync(cluster, inst)) {
    throw Error(ErrorCode::kDisksDegraded, "Disks of instance " + name + " are degraded");
  }
  check_memory(cluster, inst, *inst.secondary());
}

void migrate(Cluster& cluster, JobLog& log, const std::string& name) {
  check_migrate(cluster, name);
  ClusterConfig& config = cluster.config();
  const std::string source = config.instance(name).primary_node;
  const std::string target = *config.instance(name).secondary();
  auto inst = [&]() -> InstanceRecord& { return config.instance(name); };
  auto pause = [&]() { cluster.advance(kStepDelay); };

  log.step("Migrating instance " + name);
  log.step("* checking disk consistency between source and target");
  if (!disks_in_sync(cluster, inst())) {
    throw Error(ErrorCode::kDisksDegraded, "Disks of instance " + name + " are degraded");
  }
  pause();
  log.step("* switching node " + target + " to secondary mode");
  set_mode_all(cluster, inst(), DrbdTransition::secondary(target));
  log.step("* changing into standalone mode");
  set_mode_all(cluster, inst(), DrbdTransition::standalone());
  pause();
  log.step("* changing disks into dual-master mode");
  set_dual_primary_allowed(cluster, inst(), true);
  set_mode_all(cluster, inst(), DrbdTransition::connected());
  set_mode_all(cluster, inst(), DrbdTransition::dual_primary());
  pause();
  log.step("* wait until resync is done");
  wait_for_sync(cluster, log, inst(), std::nullopt);
  pause();
  log.step("* preparing " + target + " to accept the instance");
  log.step("* migrating instance to " + target);
  cluster.world().set_vm_migrating(name, true);
  pause();
  log.step("* starting memory transfer");
  try {
    transfer_memory(cluster.world(), name, source, target, inst().maxmem(), config.migration_rate,
                    seconds_to_millis(config.migration_report_every), [&](double pct) {
                      log.step("* memory transfer progress: " + format_percent(pct) + " %");
                    });
  } catch (...) {
    cluster.world().set_vm_migrating(name, false);
    set_dual_primary_allowed(cluster, inst(), false);
    throw;
  }
  log.step("* memory transfer complete");
  // Cutover: the guest pauses on the source and resumes on the target.
  cluster.world().move_vm(name, source, target);
  cluster.world().arm_probe_loss(name);
  InstanceRecord& rec = inst();
  rec.primary_node = target;
  rec.secondary_nodes = {source};
  touch(cluster, rec);

  log.step("* switching node " + source + " to secondary mode");
  set_mode_all(cluster, rec, DrbdTransition::secondary(source));
  set_dual_primary_allowed(cluster, rec, false);
  pause();
  log.step("* wait until resync is done");
  wait_for_sync(cluster, log, rec, std::nullopt);
  log.step("* changing into standalone mode");
  set_mode_all(cluster, rec, DrbdTransition::standalone());
  pause();
  log.step("* changing disks into single-master mode");
  set_mode_all(cluster, rec, DrbdTransition::connected());
  pause();
  log.step("* wait until resync is done");
  wait_for_sync(cluster, log, rec, std::nullopt);
  pause();
  cluster.world().disarm_probe_loss(name);
  log.step("* done");
  cluster.commit(&log);
}

void check_failover(const Cluster& cluster, const FailoverRequest& req) {
  const InstanceRecord& inst = find_instance(cluster, req.name);
  if (inst.disk_template != DiskTemplate::kDrbd) {
    throw Error(ErrorCode::kNotDrbd, "Instance " + req.name + " has disk template " +
                                         std::string(to_string(inst.disk_template)) +
                                         ", only drbd instances can fail over");
  }
  const std::string target = inst.secondary().value_or("");
  if (!cluster.node_online(target)) {
    throw Error(ErrorCode::kSecondaryOffline, "Secondary node " + target + " is offline");
  }
  if (!req.ignore_consistency) {
    if (!cluster.node_online(inst.primary_node)) {
      throw Error(ErrorCode::kConsistencyRequired,
                  "Primary node " + inst.primary_node +
                      " is offline, disk consistency cannot be checked; use --ignore-consistency");
    }
    if (!disks_in_sync(cluster, inst)) {
      throw Error(ErrorCode::kConsistencyRequired,
                  "Disks of instance " + req.name +
                      " are degraded on the target; use --ignore-consistency");
    }
  }
  if (inst.admin_state == AdminState::kUp) {
    MiB need = inst.maxmem();
    const SimNode& t = cluster.world().node(target);
    MiB free = t.mtotal - t.mnode - t.mem_used;
    if (free < need) {
      throw Error(ErrorCode::kInsufficientMemory,
                  "Not enough memory on node " + target + " for instance " + req.name +
                      ": needed " + std::to_string(need) + " MiB, available " +
                      std::to_string(free) + " MiB");
    }
  }
}

void failover(Cluster& cluster, JobLog& log, const FailoverRequest& req) {
  check_failover(cluster, req);
  ClusterConfig& config = cluster.config();
  const std::string name = req.name;
  const std::string source = config.instance(name).primary_node;
  const std::string target = *config.instance(name).secondary();
  const bool source_alive = cluster.world().reachable(source);
  const std::string source_ip = config.node(source).mgmt_ip;

  log.step("Failover instance " + name);
  log.step("* checking disk consistency between source and target");
  if (!req.ignore_consistency && !disks_in_sync(cluster, config.instance(name))) {
    throw Error(ErrorCode::kConsistencyRequired, "Disks of instance " + name + " are degraded");
  }
  log.step("* shutting down instance on source node");
  if (!source_alive) {
    cluster.advance(kRpcTimeout);
    log.warning("Could not shutdown instance " + name + " on node " + source +
                ", proceeding anyway; please make sure node " + source +
                " is down; error details: " + shutdown_error(source_ip));
  } else {
    cluster.world().vm_set_state(source, name, VmState::kStopped);
    cluster.advance(kStepDelay);
  }

  log.step("* deactivating the instance's disks on source node");
  if (!source_alive) cluster.advance(kRpcTimeout * 2);
  deactivate_disks(config, cluster.storage(), cluster.world(), name, source, log,
                   cluster.active_job());

  InstanceRecord& rec = config.instance(name);
  rec.primary_node = target;
  rec.secondary_nodes = {source};
  touch(cluster, rec);
  if (!source_alive) cluster.advance(kRpcTimeout);
  cluster.commit(&log);

  log.step("* activating the instance's disks on target node " + target);
  if (!source_alive) cluster.advance(kRpcTimeout * 2);
  for (std::size_t i = 0; i < rec.disks.size(); ++i) {
    const DiskSpec& d = rec.disks[i];
    if (d.disk_template != DiskTemplate::kDrbd) continue;
    if (!source_alive) {
      log.warning("Could not prepare block device disk/" + std::to_string(i) + " on node " +
                  source + " (is_primary=False, pass=1): " + no_route_error(source_ip));
    }
    cluster.storage().set_mode(d.uuid, DrbdTransition::single_primary(target), cluster.now(),
                               cluster.active_job());
  }

  log.step("* starting the instance on the target node " + target);
  if (rec.admin_state == AdminState::kUp) {
    start_vm(cluster, rec, target, {});
    cluster.advance(kRpcTimeout);
  }
  cluster.commit(&log);
}

std::string instance_status(const Cluster& cluster, const InstanceRecord& inst) {
  bool running = cluster.instance_running(inst);
  if (inst.admin_state == AdminState::kUp) return running ? "running" : "ERROR_down";
  return running ? "ERROR_up" : "ADMIN_down";
}

namespace {

std::string drbd_side_status(const Cluster& cluster, const DrbdPair& pair, const std::string& node) {
  const DrbdSide& side = pair.side(node);
  std::string dev = "/dev/drbd" + std::to_string(side.minor) + " (147:" + std::to_string(side.minor) + ")";
  if (!cluster.world().reachable(node)) return dev + " status unknown, node unreachable";
  if (pair.syncing()) {
    return dev + " in resync, " + format_percent(pair.sync_percent()) + "% done, status *DEGRADED*";
  }
  if (side.conn != DrbdConn::kConnected) return dev + " standalone, status *DEGRADED*";
  if (pair.up_to_date()) return dev + " in sync, status ok";
  return dev + " inconsistent, status *DEGRADED*";
}

std::string lv_device(const Cluster& cluster, const LvRef& ref) {
  std::string dev = "/dev/" + ref.vg + "/" + ref.lv_name;
  if (const LogicalVolume* lv = cluster.storage().find_lv(ref)) {
    dev += " (254:" + std::to_string(lv->dm_minor) + ")";
  }
  return dev;
}

}  // namespace

nlohmann::json instance_info(const Cluster& cluster, const std::string& name) {
  using nlohmann::json;
  const ClusterConfig& config = cluster.config();
  const InstanceRecord& inst = config.instance(name);
  const SimClock& clock = cluster.world().clock();

  json out;
  out["name"] = inst.name;
  out["uuid"] = inst.uuid;
  out["serial"] = inst.serial;
  out["ctime"] = clock.iso_time(inst.ctime);
  out["mtime"] = clock.iso_time(inst.mtime);
  out["admin_state"] = to_string(inst.admin_state);
  out["actual_state"] = to_string(cluster.actual_state(inst));
  out["status"] = instance_status(cluster, inst);
  out["primary_node"] = inst.primary_node;
  out["secondary_nodes"] = inst.secondary_nodes;
  out["group"] = kDefaultGroup;
  out["group_uuid"] = config.group_uuid;
  out["os"] = inst.os_spec;
  out["network_port"] = inst.network_port;
  out["hypervisor"] = inst.hypervisor;
  out["console"] = {{"kind", inst.hypervisor},
                    {"host", inst.primary_node},
                    {"port", inst.network_port},
                    {"display", inst.network_port - 5900}};

  json hv = json::array();
  for (const auto& [key, dflt] : kvm_defaults()) {
    auto it = inst.hv_overrides.find(key);
    bool is_default = it == inst.hv_overrides.end();
    hv.push_back({{"key", key},
                  {"value", is_default ? cluster_hv_value(config, inst.hypervisor, key) : it->second},
                  {"default", is_default}});
  }
  out["hv_params"] = hv;

  EffectiveBeParams be = effective(inst.be_params);
  auto be_row = [](const std::string& key, const std::string& value, bool is_default) {
    return json{{"key", key}, {"value", value}, {"default", is_default}};
  };
  out["be_params"] = json::array({
      be_row("auto_balance", be.auto_balance ? "True" : "False", !inst.be_params.auto_balance),
      be_row("maxmem", std::to_string(be.maxmem), !inst.be_params.maxmem),
      be_row("memory", std::to_string(be.maxmem), true),
      be_row("minmem", std::to_string(be.minmem), !inst.be_params.minmem),
      be_row("spindle_use", std::to_string(be.spindle_use), !inst.be_params.spindle_use),
      be_row("vcpus", std::to_string(be.vcpus), !inst.be_params.vcpus),
  });

  json nics = json::array();
  for (std::size_t i = 0; i < inst.nics.size(); ++i) {
    const NicSpec& n = inst.nics[i];
    nics.push_back({{"index", i},
                    {"mac", n.mac},
                    {"ip", n.ip ? json(*n.ip) : json(nullptr)},
                    {"mode", n.mode},
                    {"link", n.link},
                    {"vlan", ""},
                    {"network", nullptr},
                    {"uuid", n.uuid},
                    {"name", n.name ? json(*n.name) : json(nullptr)}});
  }
  out["nics"] = nics;
  out["disk_template"] = to_string(inst.disk_template);

  json disks = json::array();
  const std::optional<std::string> secondary = inst.secondary();
  for (std::size_t i = 0; i < inst.disks.size(); ++i) {
    const DiskSpec& d = inst.disks[i];
    json dj{{"index", i},
            {"template", to_string(d.disk_template)},
            {"size", d.size},
            {"access", d.access},
            {"name", nullptr},
            {"uuid", d.uuid}};
    json children = json::array();
    if (d.disk_template == DiskTemplate::kDrbd) {
      const DrbdPair& pair = cluster.storage().pair(d.uuid);
      dj["node_a"] = {{"node", d.node_a}, {"minor", d.minor_a}};
      dj["node_b"] = {{"node", d.node_b}, {"minor", d.minor_b}};
      dj["port"] = d.port;
      dj["auth_key"] = d.auth_key;
      dj["on_primary"] = drbd_side_status(cluster, pair, inst.primary_node);
      if (secondary) dj["on_secondary"] = drbd_side_status(cluster, pair, *secondary);
      // One child per volume name; each exists on both nodes.
      std::vector<std::string> names;
      for (const auto& ref : d.children) {
        if (std::find(names.begin(), names.end(), ref.lv_name) == names.end()) names.push_back(ref.lv_name);
      }
      for (std::size_t c = 0; c < names.size(); ++c) {
        json cj{{"index", c}, {"template", "plain"}, {"name", nullptr}};
        for (const auto& ref : d.children) {
          if (ref.lv_name != names[c]) continue;
          cj["logical_id"] = ref.vg + "/" + ref.lv_name;
          if (const LogicalVolume* lv = cluster.storage().find_lv(ref)) cj["size"] = lv->size;
          if (ref.node == inst.primary_node) cj["on_primary"] = lv_device(cluster, ref);
          if (secondary && ref.node == *secondary) cj["on_secondary"] = lv_device(cluster, ref);
        }
        children.push_back(cj);
      }
    } else if (!d.children.empty()) {
      dj["on_primary"] = lv_device(cluster, d.children.front());
      dj["logical_id"] = d.children.front().vg + "/" + d.children.front().lv_name;
    }
    dj["children"] = children;
    disks.push_back(dj);
  }
  out["disks"] = disks;
  return out;
}

Table instance_list(const Cluster& cluster, const std::vector<std::string>& fields) {
  static const std::map<std::string, std::string> headers = {
      {"name", "Instance"},
      {"primary_node", "Primary_node"},
      {"secondary_nodes", "Secondary_Nodes"},
      {"status", "Status"},
      {"os", "OS"},
      {"disk_template", "Disk_template"},
      {"network_port", "Network_port"},
      {"admin_state", "Admin_state"},
      {"oper_state", "Running"},
  };
  Table t;
  for (const auto& f : fields) {
    auto it = headers.find(f);
    if (it == headers.end()) throw Error(ErrorCode::kUnknownField, "Unknown output field '" + f + "'");
    t.headers.push_back(it->second);
  }
  if (!cluster.initialized()) return t;
  for (const auto& [name, inst] : cluster.config().instances) {
    std::vector<std::string> row;
    for (const auto& f : fields) {
      if (f == "name") {
        row.push_back(inst.name);
      } else if (f == "primary_node") {
        row.push_back(inst.primary_node);
      } else if (f == "secondary_nodes") {
        std::string s;
        for (const auto& n : inst.secondary_nodes) s += (s.empty() ? "" : ",") + n;
        row.push_back(s);
      } else if (f == "status") {
        row.push_back(instance_status(cluster, inst));
      } else if (f == "os") {
        row.push_back(inst.os_spec);
      } else if (f == "disk_template") {
        row.push_back(std::string(to_string(inst.disk_template)));
      } else if (f == "network_port") {
        row.push_back(std::to_string(inst.network_port));
      } else if (f == "admin_state") {
        row.push_back(std::string(to_string(inst.admin_state)));
      } else if (f == "oper_state") {
        row.push_back(cluster.instance_running(inst) ? "Y" : "N");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace gantry
