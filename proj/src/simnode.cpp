#include "gantry/simnode.hpp"

#include <algorithm>
#include <cmath>

#include "gantry/error.hpp"

namespace gantry {

std::string_view bridge_of(Network net) {
  return net == Network::kMgmt ? kMgmtBridge : kPublicBridge;
}

std::optional<Network> network_of_bridge(std::string_view bridge) {
  if (bridge == kMgmtBridge) return Network::kMgmt;
  if (bridge == kPublicBridge) return Network::kPublic;
  return std::nullopt;
}

bool is_known_bridge(std::string_view bridge) {
  return network_of_bridge(bridge).has_value();
}

std::string_view to_string(Network net) {
  return net == Network::kMgmt ? "mgmt" : "public";
}

Network parse_network(std::string_view text) {
  if (text == "mgmt" || text == kMgmtBridge) return Network::kMgmt;
  if (text == "public" || text == kPublicBridge) return Network::kPublic;
  throw Error(ErrorCode::kInvalidParams,
              "unknown network '" + std::string(text) + "' (expected mgmt or public)");
}

std::string_view to_string(Power p) { return p == Power::kOn ? "on" : "off"; }

Power parse_power(std::string_view text) {
  if (text == "on") return Power::kOn;
  if (text == "off") return Power::kOff;
  throw Error(ErrorCode::kInvalidParams,
              "unknown power state '" + std::string(text) + "' (expected on or off)");
}

std::string_view to_string(BootOrder b) {
  return b == BootOrder::kDisk ? "disk" : "cdrom";
}

BootOrder parse_boot_order(std::string_view text) {
  if (text == "disk") return BootOrder::kDisk;
  if (text == "cdrom") return BootOrder::kCdrom;
  throw Error(ErrorCode::kInvalidParams, "unknown boot order '" + std::string(text) + "'");
}

std::string ProbeResult::text() const {
  if (!reply()) return "Request timed out.";
  std::string time = latency_ms == 0 ? "time<1ms" : "time=" + std::to_string(latency_ms) + "ms";
  return "Reply from " + address + ": bytes=32 " + time + " TTL=64";
}

SimWorld::SimWorld(std::int64_t epoch_unix) : clock_(epoch_unix) {}

void SimWorld::set_host(const std::string& fqdn, const std::string& ip) { hosts_[fqdn] = ip; }

std::optional<std::string> SimWorld::resolve(const std::string& fqdn) const {
  auto it = hosts_.find(fqdn);
  if (it == hosts_.end()) return std::nullopt;
  return it->second;
}

SimNode& SimWorld::add_node(const std::string& name, const std::string& ip, MiB mtotal,
                            MiB mnode) {
  if (has_node(name)) {
    throw Error(ErrorCode::kDuplicateSimNode, "machine " + name + " already exists");
  }
  if (mtotal <= 0 || mnode < 0 || mnode > mtotal) {
    throw Error(ErrorCode::kInvalidParams, "invalid memory profile for " + name);
  }
  SimNode n;
  n.name = name;
  n.ip = ip;
  n.mtotal = mtotal;
  n.mnode = mnode;
  n.credentials = "hostkey-" + name;
  // Both OS definitions ship with a default variant.
  n.os_providers = {"debootstrap", "image"};
  n.files["/etc/ganeti/instance-debootstrap/variants.list"] = "default\n";
  n.files["/etc/ganeti/instance-debootstrap/variants/default.conf"] = "";
  n.files["/etc/ganeti/instance-image/variants.list"] = "default\n";
  n.files["/etc/ganeti/instance-image/variants/default.conf"] = "";
  set_host(name, ip);
  return nodes_.emplace(name, std::move(n)).first->second;
}

SimNode& SimWorld::node(const std::string& name) {
  auto it = nodes_.find(name);
  if (it == nodes_.end()) throw Error(ErrorCode::kUnknownNode, "unknown node " + name);
  return it->second;
}

const SimNode& SimWorld::node(const std::string& name) const {
  auto it = nodes_.find(name);
  if (it == nodes_.end()) throw Error(ErrorCode::kUnknownNode, "unknown node " + name);
  return it->second;
}

bool SimWorld::reachable(const std::string& name) const {
  auto it = nodes_.find(name);
  return it != nodes_.end() && it->second.reachable();
}

void SimWorld::set_node_power(const std::string& name, Power power) {
  SimNode& n = node(name);
  if (n.power == power) return;
  if (power == Power::kOff) {
    for (auto& [_, vm] : n.vms) {
      vm.state = VmState::kStopped;
      vm.migrating = false;
    }
    n.mem_used = 0;
  }
  n.power = power;
  if (power_hook_) power_hook_(name, power);
}

void SimWorld::vm_set_state(const std::string& node_name, const std::string& instance,
                            VmState state, const VmLaunch& launch) {
  SimNode& n = node(node_name);
  if (state == VmState::kStopped) {
    auto it = n.vms.find(instance);
    if (it == n.vms.end() || it->second.state == VmState::kStopped) return;
    if (!n.reachable()) throw Error(ErrorCode::kNodeOff, "node " + node_name + " is powered off");
    it->second.state = VmState::kStopped;
    it->second.migrating = false;
    n.mem_used -= it->second.memory;
    return;
  }
  if (!n.reachable()) throw Error(ErrorCode::kNodeOff, "node " + node_name + " is powered off");
  if (launch.boot_order == BootOrder::kCdrom &&
      (!launch.cdrom_path || !n.has_file(*launch.cdrom_path))) {
    throw Error(ErrorCode::kMissingIso, "cdrom image " + launch.cdrom_path.value_or("(none)") +
                                            " not present on node " + node_name);
  }
  SimVm& vm = n.vms[instance];
  if (vm.state == VmState::kRunning) n.mem_used -= vm.memory;
  vm.instance = instance;
  vm.state = VmState::kRunning;
  vm.boot_order = launch.boot_order;
  vm.cdrom_path = launch.cdrom_path;
  vm.console_port = launch.console_port;
  vm.memory = launch.memory;
  vm.bridge = launch.bridge;
  vm.address = launch.address.empty() ? instance : launch.address;
  vm.migrating = false;
  n.mem_used += vm.memory;
}

void SimWorld::move_vm(const std::string& instance, const std::string& from,
                       const std::string& to) {
  SimNode& src = node(from);
  SimNode& dst = node(to);
  auto it = src.vms.find(instance);
  if (it == src.vms.end() || it->second.state != VmState::kRunning) {
    throw Error(ErrorCode::kInstanceNotRunning, instance + " is not running on " + from);
  }
  if (!src.reachable() || !dst.reachable()) {
    throw Error(ErrorCode::kNodeOff, "migration endpoint powered off");
  }
  SimVm vm = it->second;
  src.mem_used -= vm.memory;
  src.vms.erase(it);
  vm.migrating = false;
  SimVm& placed = dst.vms[instance];
  if (placed.state == VmState::kRunning) dst.mem_used -= placed.memory;
  placed = std::move(vm);
  dst.mem_used += placed.memory;
}

void SimWorld::set_vm_bridge(const std::string& instance, const std::string& bridge) {
  auto host = vm_host(instance);
  if (!host) return;
  nodes_.at(*host).vms.at(instance).bridge = bridge;
}

void SimWorld::set_vm_migrating(const std::string& instance, bool migrating) {
  auto host = vm_host(instance);
  if (!host) return;
  nodes_.at(*host).vms.at(instance).migrating = migrating;
}

std::optional<std::string> SimWorld::vm_host(const std::string& instance) const {
  for (const auto& [name, n] : nodes_) {
    auto it = n.vms.find(instance);
    if (it != n.vms.end() && it->second.state == VmState::kRunning) return name;
  }
  return std::nullopt;
}

const SimVm* SimWorld::find_running_vm(const std::string& instance) const {
  auto host = vm_host(instance);
  if (!host) return nullptr;
  return &nodes_.at(*host).vms.at(instance);
}

ProbeResult SimWorld::probe(Network observer, const std::string& instance) {
  ProbeResult r;
  r.address = instance;
  const SimVm* vm = find_running_vm(instance);
  if (vm == nullptr) {
    // A VM that died with its node reads as node-down.
    r.outcome = ProbeOutcome::kVmDown;
    for (const auto& [_, n] : nodes_) {
      auto it = n.vms.find(instance);
      if (it != n.vms.end()) {
        r.address = it->second.address;
        if (!n.reachable()) r.outcome = ProbeOutcome::kNodeDown;
      }
    }
    return r;
  }
  r.address = vm->address;
  if (network_of_bridge(vm->bridge) != observer) {
    r.outcome = ProbeOutcome::kWrongNetwork;
    return r;
  }
  if (armed_losses_.erase(instance) != 0) {
    r.outcome = ProbeOutcome::kTransientLoss;
    return r;
  }
  r.outcome = ProbeOutcome::kReply;
  r.latency_ms = vm->migrating ? migration_latency_ms : 0;
  return r;
}

void SimWorld::arm_probe_loss(const std::string& instance) { armed_losses_.insert(instance); }

void SimWorld::disarm_probe_loss(const std::string& instance) { armed_losses_.erase(instance); }

int SimWorld::add_monitor(Network observer, const std::string& instance, Millis interval) {
  if (interval.count() <= 0) {
    throw Error(ErrorCode::kInvalidParams, "monitor interval must be positive");
  }
  int id = next_monitor_++;
  Monitor m{observer, instance, interval, now() + interval, {}};
  m.samples.push_back({now(), probe(observer, instance)});
  monitors_.emplace(id, std::move(m));
  return id;
}

const std::vector<ProbeSample>& SimWorld::monitor_samples(int id) const {
  auto it = monitors_.find(id);
  if (it == monitors_.end()) {
    throw Error(ErrorCode::kInvalidParams, "unknown monitor " + std::to_string(id));
  }
  return it->second.samples;
}

void SimWorld::remove_monitor(int id) { monitors_.erase(id); }

void SimWorld::schedule_power(Millis at, const std::string& node_name, Power power) {
  node(node_name);
  if (at < now()) throw Error(ErrorCode::kNegativeDt, "cannot schedule in the past");
  power_events_.push_back({at, node_name, power});
}

void SimWorld::move_time_to(Millis t) {
  Millis delta = t - now();
  if (delta.count() <= 0) return;
  clock_.advance_to(t);
  if (advance_hook_) advance_hook_(delta);
}

Millis SimWorld::advance_clock(Millis dt) {
  if (dt.count() < 0) throw Error(ErrorCode::kNegativeDt, "negative clock advance");
  const Millis target = now() + dt;
  for (;;) {
    std::optional<Millis> next;
    for (const auto& e : power_events_) {
      if (e.at <= target && (!next || e.at < *next)) next = e.at;
    }
    for (const auto& [_, m] : monitors_) {
      if (m.next_due <= target && (!next || m.next_due < *next)) next = m.next_due;
    }
    if (!next) break;
    move_time_to(*next);
    const Millis t = *next;
    // Power events first, in scheduling order.
    std::vector<PowerEvent> due;
    auto split = std::stable_partition(power_events_.begin(), power_events_.end(),
                                       [t](const PowerEvent& e) { return e.at > t; });
    due.assign(split, power_events_.end());
    power_events_.erase(split, power_events_.end());
    for (const auto& e : due) set_node_power(e.node, e.power);
    for (auto& [_, m] : monitors_) {
      if (m.next_due <= t) {
        m.samples.push_back({t, probe(m.observer, m.instance)});
        m.next_due += m.interval;
      }
    }
  }
  move_time_to(target);
  return now();
}

double transfer_percent(MiB size, double rate, Millis elapsed) {
  if (size <= 0) return 100.0;
  double pct = 100.0 * rate * millis_to_seconds(elapsed) / static_cast<double>(size);
  return std::min(pct, 100.0);
}

Millis transfer_duration(MiB size, double rate) {
  if (size <= 0) return Millis{0};
  return Millis{static_cast<std::int64_t>(std::ceil(static_cast<double>(size) * 1000.0 / rate))};
}

TransferProgress transfer_memory(SimWorld& world, const std::string& instance,
                                 const std::string& src, const std::string& dst, MiB size,
                                 double rate, Millis report_every,
                                 const std::function<void(double)>& on_progress) {
  if (!(rate > 0.0)) throw Error(ErrorCode::kInvalidParams, "transfer rate must be positive");
  if (report_every.count() <= 0) {
    throw Error(ErrorCode::kInvalidParams, "report interval must be positive");
  }
  auto check_nodes = [&] {
    for (const auto* n : {&src, &dst}) {
      if (!world.reachable(*n)) {
        throw Error(ErrorCode::kNodeOff, "node " + *n + " went down during memory transfer");
      }
    }
  };
  check_nodes();
  if (world.vm_host(instance) != src) {
    throw Error(ErrorCode::kInstanceNotRunning, instance + " is not running on " + src);
  }
  TransferProgress out;
  out.duration = transfer_duration(size, rate);
  Millis elapsed{0};
  while (elapsed < out.duration) {
    Millis next = elapsed + report_every;
    if (next >= out.duration) {
      world.advance_clock(out.duration - elapsed);
      check_nodes();
      break;
    }
    world.advance_clock(report_every);
    check_nodes();
    elapsed = next;
    double pct = transfer_percent(size, rate, elapsed);
    out.percents.push_back(pct);
    if (on_progress) on_progress(pct);
  }
  return out;
}

}  // namespace gantry
