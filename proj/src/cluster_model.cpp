#include "gantry/cluster_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "gantry/error.hpp"
#include "gantry/simnode.hpp"

namespace gantry {

std::string_view to_string(NodeRole r) {
  switch (r) {
    case NodeRole::kMaster:
      return "master";
    case NodeRole::kMasterCandidate:
      return "master_candidate";
    case NodeRole::kRegular:
      return "regular";
  }
  return "regular";
}

NodeRole parse_node_role(std::string_view s) {
  if (s == "master") return NodeRole::kMaster;
  if (s == "master_candidate") return NodeRole::kMasterCandidate;
  if (s == "regular") return NodeRole::kRegular;
  throw Error(ErrorCode::kParseError, "unknown node role " + std::string(s));
}

std::string_view to_string(AdminState s) { return s == AdminState::kUp ? "up" : "down"; }

AdminState parse_admin_state(std::string_view s) {
  if (s == "up") return AdminState::kUp;
  if (s == "down") return AdminState::kDown;
  throw Error(ErrorCode::kParseError, "unknown admin state " + std::string(s));
}

std::string_view to_string(DiskTemplate t) { return t == DiskTemplate::kDrbd ? "drbd" : "plain"; }

DiskTemplate parse_disk_template(std::string_view s) {
  if (s == "drbd") return DiskTemplate::kDrbd;
  if (s == "plain") return DiskTemplate::kPlain;
  throw Error(ErrorCode::kInvalidParams, "unknown disk template '" + std::string(s) + "'");
}

EffectiveBeParams effective(const BeParams& be) {
  EffectiveBeParams e;
  if (be.maxmem) e.maxmem = *be.maxmem;
  if (be.minmem) e.minmem = *be.minmem;
  // A lone bound drags the default of the other one along.
  if (be.maxmem && !be.minmem) e.minmem = std::min(e.minmem, e.maxmem);
  if (be.minmem && !be.maxmem) e.maxmem = std::max(e.maxmem, e.minmem);
  if (be.vcpus) e.vcpus = *be.vcpus;
  if (be.auto_balance) e.auto_balance = *be.auto_balance;
  if (be.spindle_use) e.spindle_use = *be.spindle_use;
  return e;
}

MiB parse_size(std::string_view text) {
  auto fail = [&]() -> MiB {
    throw Error(ErrorCode::kParseError, "invalid size '" + std::string(text) + "'");
  };
  if (text.empty()) return fail();
  double multiplier = 1.0;
  std::string_view digits = text;
  char last = text.back();
  if (last == 'M' || last == 'm') {
    digits.remove_suffix(1);
  } else if (last == 'G' || last == 'g') {
    multiplier = 1024.0;
    digits.remove_suffix(1);
  } else if (last == 'T' || last == 't') {
    multiplier = 1024.0 * 1024.0;
    digits.remove_suffix(1);
  } else if (!(last >= '0' && last <= '9')) {
    return fail();
  }
  if (digits.empty()) return fail();
  double value = 0;
  const char* end = digits.data() + digits.size();
  auto [ptr, ec] = std::from_chars(digits.data(), end, value, std::chars_format::fixed);
  if (ec != std::errc{} || ptr != end || value < 0) return fail();
  return static_cast<MiB>(std::llround(value * multiplier));
}

BeParams parse_be_params(std::string_view text) {
  BeParams be;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view item = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) {
      if (comma == text.size()) break;
      continue;
    }
    std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kParseError, "missing '=' in backend parameter '" + std::string(item) + "'");
    }
    std::string key(item.substr(0, eq));
    std::string_view value = item.substr(eq + 1);
    auto parse_int = [&]() {
      int v = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || p != value.data() + value.size()) {
        throw Error(ErrorCode::kParseError, "invalid value for " + key);
      }
      return v;
    };
    if (key == "minmem") {
      be.minmem = parse_size(value);
    } else if (key == "maxmem") {
      be.maxmem = parse_size(value);
    } else if (key == "memory") {
      be.minmem = be.maxmem = parse_size(value);
    } else if (key == "vcpus") {
      be.vcpus = parse_int();
    } else if (key == "spindle_use") {
      be.spindle_use = parse_int();
    } else if (key == "auto_balance") {
      if (value == "true" || value == "True") {
        be.auto_balance = true;
      } else if (value == "false" || value == "False") {
        be.auto_balance = false;
      } else {
        throw Error(ErrorCode::kParseError, "invalid value for auto_balance");
      }
    } else {
      throw Error(ErrorCode::kParseError, "unknown backend parameter '" + key + "'");
    }
    if (comma == text.size()) break;
  }
  return be;
}

NodeRecord& ClusterConfig::node(const std::string& name) {
  auto it = nodes.find(name);
  if (it == nodes.end()) throw Error(ErrorCode::kUnknownNode, "Node " + name + " is not a cluster member");
  return it->second;
}

const NodeRecord& ClusterConfig::node(const std::string& name) const {
  auto it = nodes.find(name);
  if (it == nodes.end()) throw Error(ErrorCode::kUnknownNode, "Node " + name + " is not a cluster member");
  return it->second;
}

InstanceRecord& ClusterConfig::instance(const std::string& name) {
  auto it = instances.find(name);
  if (it == instances.end()) throw Error(ErrorCode::kUnknownInstance, "Instance '" + name + "' not known");
  return it->second;
}

const InstanceRecord& ClusterConfig::instance(const std::string& name) const {
  auto it = instances.find(name);
  if (it == instances.end()) throw Error(ErrorCode::kUnknownInstance, "Instance '" + name + "' not known");
  return it->second;
}

std::vector<std::string> ClusterConfig::config_holders() const {
  std::vector<std::string> out;
  for (const auto& [name, n] : nodes) {
    if (n.role != NodeRole::kRegular) out.push_back(name);
  }
  return out;
}

bool ClusterConfig::hypervisor_enabled(std::string_view hv) const {
  return std::find(enabled_hypervisors.begin(), enabled_hypervisors.end(), hv) !=
         enabled_hypervisors.end();
}

void ClusterConfig::bump_serial() {
  ++config_serial;
  serial_audit.emplace_back(config_serial, active_job);
}

int allocate_network_port(ClusterConfig& config) {
  int port = config.port_counter++;
  config.bump_serial();
  return port;
}

int allocate_drbd_minor(ClusterConfig& config, const std::string& node) {
  NodeRecord& rec = config.node(node);
  if (rec.minor_counter >= kMaxDrbdMinors) {
    throw Error(ErrorCode::kMinorsExhausted,
                "no free DRBD minors on node " + node + " (minor_count=" +
                    std::to_string(kMaxDrbdMinors) + ")");
  }
  int minor = rec.minor_counter++;
  config.bump_serial();
  return minor;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t draw(ClusterConfig& config) {
  return splitmix64(config.rng_seed ^ splitmix64(config.rng_draws++));
}

std::string hex(std::uint64_t v, int digits) {
  std::string out(static_cast<std::size_t>(digits), '0');
  for (int i = digits - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = "0123456789abcdef"[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace

std::string generate_identity(ClusterConfig& config, IdentityKind kind) {
  switch (kind) {
    case IdentityKind::kMac: {
      std::uint64_t v = draw(config);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s:%02x:%02x:%02x", kMacPrefix.data(),
                    static_cast<unsigned>((v >> 16) & 0xff), static_cast<unsigned>((v >> 8) & 0xff),
                    static_cast<unsigned>(v & 0xff));
      return buf;
    }
    case IdentityKind::kUuid: {
      std::uint64_t hi = draw(config);
      std::uint64_t lo = draw(config);
      hi = (hi & ~0xf000ULL) | 0x4000ULL;                       // version 4
      lo = (lo & 0x3fffffffffffffffULL) | 0x8000000000000000ULL;  // RFC 4122 variant
      std::string h = hex(hi, 16);
      std::string l = hex(lo, 16);
      return h.substr(0, 8) + "-" + h.substr(8, 4) + "-" + h.substr(12, 4) + "-" + l.substr(0, 4) +
             "-" + l.substr(4, 12);
    }
    case IdentityKind::kAuthKey: {
      std::string key = hex(draw(config), 16) + hex(draw(config), 16) + hex(draw(config), 16);
      return key.substr(0, 40);
    }
  }
  return {};
}

std::string generate_unique_mac(ClusterConfig& config) {
  std::set<std::string> used;
  for (const auto& [_, inst] : config.instances) {
    for (const auto& nic : inst.nics) used.insert(nic.mac);
  }
  for (;;) {
    std::string mac = generate_identity(config, IdentityKind::kMac);
    if (used.count(mac) == 0) return mac;
  }
}

std::string no_route_error(const std::string& ip) {
  return "Error 7: Failed connect to " + ip + ":" + std::to_string(kNodeDaemonPort) +
         "; No route to host";
}

std::vector<DistributionResult> distribute_config(const ClusterConfig& config, SimWorld& world,
                                                  JobLog* log) {
  std::vector<DistributionResult> out;
  for (const auto& name : config.config_holders()) {
    bool ok = world.reachable(name);
    if (ok) {
      world.node(name).config_serial = config.config_serial;
    } else if (log != nullptr) {
      log->warning("Copy of file " + std::string(kConfigDataPath) + " to node " + name +
                   " failed: " + no_route_error(config.node(name).mgmt_ip));
    }
    out.push_back({name, ok});
  }
  return out;
}

const std::map<std::string, std::string>& kvm_defaults() {
  static const std::map<std::string, std::string> defaults = {
      {"acpi", "True"},
      {"boot_order", "disk"},
      {"cdrom_disk_type", ""},
      {"cdrom_image_path", ""},
      {"cpu_cores", "0"},
      {"cpu_mask", "all"},
      {"cpu_sockets", "0"},
      {"cpu_threads", "0"},
      {"cpu_type", ""},
      {"disk_cache", "default"},
      {"disk_type", "paravirtual"},
      {"initrd_path", ""},
      {"kernel_args", "ro"},
      {"kernel_path", "/boot/vmlinuz-kvmU"},
      {"nic_type", "paravirtual"},
      {"serial_console", "True"},
      {"vnc_bind_address", ""},
  };
  return defaults;
}

std::string cluster_hv_value(const ClusterConfig& config, const std::string& hv,
                             const std::string& key) {
  auto hv_it = config.hypervisor_params.find(hv);
  if (hv_it != config.hypervisor_params.end()) {
    auto it = hv_it->second.find(key);
    if (it != hv_it->second.end()) return it->second;
  }
  const auto& defaults = kvm_defaults();
  auto it = defaults.find(key);
  return it == defaults.end() ? std::string() : it->second;
}

}  // namespace gantry
