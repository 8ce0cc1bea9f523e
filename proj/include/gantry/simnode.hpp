#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gantry/sim_clock.hpp"

namespace gantry {

enum class Power { kOn, kOff };

/// Observer networks. Management + storage rides VLAN 100 on br-man, the
/// public instance network VLAN 200 on br-public.
enum class Network { kMgmt, kPublic };

inline constexpr std::string_view kMgmtBridge = "br-man";
inline constexpr std::string_view kPublicBridge = "br-public";

std::string_view bridge_of(Network net);
std::optional<Network> network_of_bridge(std::string_view bridge);
bool is_known_bridge(std::string_view bridge);
std::string_view to_string(Network net);
Network parse_network(std::string_view text);
std::string_view to_string(Power p);
Power parse_power(std::string_view text);

enum class VmState { kRunning, kStopped };
enum class BootOrder { kDisk, kCdrom };

std::string_view to_string(BootOrder b);
BootOrder parse_boot_order(std::string_view text);

struct SimVm {
  std::string instance;
  VmState state = VmState::kStopped;
  BootOrder boot_order = BootOrder::kDisk;
  std::optional<std::string> cdrom_path;
  int console_port = 0;
  MiB memory = 0;
  /// Bridge the hypervisor has the first NIC plugged into.
  std::string bridge;
  /// Address that answers probes.
  std::string address;
  bool migrating = false;

  /// VNC display number.
  int display() const { return console_port - 5900; }
};

struct VmLaunch {
  BootOrder boot_order = BootOrder::kDisk;
  std::optional<std::string> cdrom_path;
  int console_port = 0;
  MiB memory = 0;
  std::string bridge;
  std::string address;
};

struct NetworkAttachment {
  int vlan;
  std::string bridge;
};

struct SimNode {
  std::string name;
  std::string ip;
  Power power = Power::kOn;
  MiB mtotal = 0;
  MiB mnode = 0;
  /// Memory held by running VMs, maintained on every VM transition.
  MiB mem_used = 0;
  std::map<std::string, SimVm> vms;
  /// Local files: path -> content.
  std::map<std::string, std::string> files;
  std::set<std::string> os_providers;
  /// Serial of the cluster config snapshot this node holds (0 = none).
  std::int64_t config_serial = 0;
  std::string credentials;
  std::vector<NetworkAttachment> networks{{100, std::string(kMgmtBridge)},
                                          {200, std::string(kPublicBridge)}};

  bool reachable() const { return power == Power::kOn; }
  bool has_file(const std::string& path) const { return files.count(path) != 0; }
};

enum class ProbeOutcome {
  kReply,
  kWrongNetwork,
  kVmDown,
  kNodeDown,
  kTransientLoss,
};

struct ProbeResult {
  ProbeOutcome outcome = ProbeOutcome::kVmDown;
  /// 0 renders as "<1ms".
  int latency_ms = 0;
  std::string address;

  bool reply() const { return outcome == ProbeOutcome::kReply; }
  /// ping-style line: "Reply from a: bytes=32 time<1ms TTL=64" or
  /// "Request timed out."
  std::string text() const;
};

struct ProbeSample {
  Millis at;
  ProbeResult result;
};

/// Simulated physical layer: machines, their VMs and files, name resolution,
/// probes, and the clock with everything it drives.
class SimWorld {
 public:
  explicit SimWorld(std::int64_t epoch_unix = SimClock::kDefaultEpoch);

  SimWorld(const SimWorld&) = delete;
  SimWorld& operator=(const SimWorld&) = delete;

  const SimClock& clock() const { return clock_; }
  Millis now() const { return clock_.now(); }

  // Name resolution (the lab's /etc/hosts + DNS).
  void set_host(const std::string& fqdn, const std::string& ip);
  std::optional<std::string> resolve(const std::string& fqdn) const;
  const std::map<std::string, std::string>& hosts() const { return hosts_; }

  SimNode& add_node(const std::string& name, const std::string& ip, MiB mtotal,
                    MiB mnode);
  bool has_node(const std::string& name) const { return nodes_.count(name) != 0; }
  SimNode& node(const std::string& name);
  const SimNode& node(const std::string& name) const;
  const std::map<std::string, SimNode>& nodes() const { return nodes_; }
  std::map<std::string, SimNode>& nodes() { return nodes_; }
  bool reachable(const std::string& name) const;

  /// Power off kills every hosted VM before any observer can look.
  void set_node_power(const std::string& name, Power power);

  /// Starts or stops a VM. Starting requires the node on and, for cdrom
  /// boot, the image in the node's files. Stopping a stopped VM is a no-op.
  void vm_set_state(const std::string& node_name, const std::string& instance,
                    VmState state, const VmLaunch& launch = {});
  /// Moves a running VM (live migration cutover).
  void move_vm(const std::string& instance, const std::string& from,
               const std::string& to);
  void set_vm_bridge(const std::string& instance, const std::string& bridge);
  void set_vm_migrating(const std::string& instance, bool migrating);

  /// Node hosting a running VM for `instance`.
  std::optional<std::string> vm_host(const std::string& instance) const;
  const SimVm* find_running_vm(const std::string& instance) const;

  ProbeResult probe(Network observer, const std::string& instance);

  /// The next probe of `instance` is lost (device swap, cutover). Disarm
  /// closes the window whether or not a probe consumed it.
  void arm_probe_loss(const std::string& instance);
  void disarm_probe_loss(const std::string& instance);

  /// Continuous ping of `instance` from `observer` every `interval`.
  int add_monitor(Network observer, const std::string& instance, Millis interval);
  const std::vector<ProbeSample>& monitor_samples(int id) const;
  void remove_monitor(int id);

  /// Advances the clock, firing scheduled events and monitors in time
  /// order and feeding elapsed time to the advance hook between them.
  Millis advance_clock(Millis dt);
  void schedule_power(Millis at, const std::string& node, Power power);

  /// Continuous processes (disk resync) advanced by elapsed time.
  void set_advance_hook(std::function<void(Millis)> hook) { advance_hook_ = std::move(hook); }
  /// Notified after a node changes power state.
  void set_power_hook(std::function<void(const std::string&, Power)> hook) {
    power_hook_ = std::move(hook);
  }

  int migration_latency_ms = 108;

 private:
  struct Monitor {
    Network observer;
    std::string instance;
    Millis interval;
    Millis next_due;
    std::vector<ProbeSample> samples;
  };
  struct PowerEvent {
    Millis at;
    std::string node;
    Power power;
  };

  void move_time_to(Millis t);

  SimClock clock_;
  std::map<std::string, std::string> hosts_;
  std::map<std::string, SimNode> nodes_;
  std::map<int, Monitor> monitors_;
  int next_monitor_ = 1;
  std::vector<PowerEvent> power_events_;
  std::set<std::string> armed_losses_;
  std::function<void(Millis)> advance_hook_;
  std::function<void(const std::string&, Power)> power_hook_;
};

struct TransferProgress {
  std::vector<double> percents;
  Millis duration{0};
};

/// Percent of `size` transferred after `elapsed` at `rate` MiB/s.
double transfer_percent(MiB size, double rate, Millis elapsed);
/// Time to move `size` MiB at `rate` MiB/s, rounded up to the millisecond.
Millis transfer_duration(MiB size, double rate);

/// Live-migration memory copy of `instance` from `src` to `dst`. Advances the
/// world clock, reporting progress every `report_every` until complete.
/// Either node losing power aborts with kNodeOff.
TransferProgress transfer_memory(SimWorld& world, const std::string& instance,
                                 const std::string& src, const std::string& dst,
                                 MiB size, double rate, Millis report_every,
                                 const std::function<void(double)>& on_progress = {});

}  // namespace gantry
