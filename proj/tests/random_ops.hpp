#pragma once

// Seeded random operation sequences against a lab cluster, and the state
// invariants that must hold after every one of them. Shared by the
// property suite and the acceptance gate.

#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gantry/allocator.hpp"
#include "gantry/error.hpp"
#include "gantry/serialize.hpp"
#include "support.hpp"

namespace gantry::testing {

struct Watermarks {
  int port_counter = kFirstNetworkPort;
  std::int64_t config_serial = 0;
  std::size_t audit_size = 0;
};

/// Every violated invariant, as text. Empty means the state is sound.
inline std::vector<std::string> invariant_violations(const Cluster& c, Watermarks& w) {
  std::vector<std::string> out;
  auto fail = [&](std::string s) { out.push_back(std::move(s)); };
  const ClusterConfig& cfg = c.config();

  // Ports: every allocated port is in use exactly once and the counter only
  // moves forward.
  std::multiset<int> ports;
  for (const auto& [name, inst] : cfg.instances) {
    ports.insert(inst.network_port);
    for (const DiskSpec& d : inst.disks) {
      if (d.disk_template == DiskTemplate::kDrbd) ports.insert(d.port);
    }
  }
  std::multiset<int> expected_ports;
  for (int p = kFirstNetworkPort; p < cfg.port_counter; ++p) expected_ports.insert(p);
  if (ports != expected_ports) fail("ports are not exactly 11000.." + std::to_string(cfg.port_counter - 1));
  if (cfg.port_counter < w.port_counter) fail("port counter moved back");
  w.port_counter = cfg.port_counter;

  // DRBD minors: unique per node and below that node's counter.
  std::map<std::string, std::set<int>> minors;
  for (const auto& [name, inst] : cfg.instances) {
    for (const DiskSpec& d : inst.disks) {
      if (d.disk_template != DiskTemplate::kDrbd) continue;
      for (const auto& [node, minor] : {std::pair{d.node_a, d.minor_a}, std::pair{d.node_b, d.minor_b}}) {
        if (!minors[node].insert(minor).second) fail("minor " + std::to_string(minor) + " reused on " + node);
        if (minor < 0 || minor >= cfg.node(node).minor_counter) fail("minor beyond counter on " + node);
      }
    }
  }

  // MACs: cluster prefix, unique.
  std::set<std::string> macs;
  for (const auto& [name, inst] : cfg.instances) {
    for (const NicSpec& n : inst.nics) {
      if (n.mac.rfind(std::string(kMacPrefix) + ":", 0) != 0) fail("mac without prefix: " + n.mac);
      if (!macs.insert(n.mac).second) fail("duplicate mac " + n.mac);
    }
  }

  // Serials: audit entries are (serial, job); each bump strictly above the
  // last and attributed to a job.
  for (std::size_t i = 1; i < cfg.serial_audit.size(); ++i) {
    if (cfg.serial_audit[i].first <= cfg.serial_audit[i - 1].first) fail("serial did not increase");
  }
  for (std::size_t i = w.audit_size; i < cfg.serial_audit.size(); ++i) {
    if (cfg.serial_audit[i].second <= 0) fail("serial bump outside a job");
  }
  if (!cfg.serial_audit.empty() && cfg.serial_audit.back().first != cfg.config_serial) {
    fail("config serial differs from the last audited bump");
  }
  if (cfg.config_serial < w.config_serial) fail("config serial moved back");
  w.config_serial = cfg.config_serial;
  w.audit_size = cfg.serial_audit.size();

  // Capacity: incremental rows equal rows derived from scratch, and VG free
  // space equals total minus what the volumes take.
  for (const auto& [node, rec] : cfg.nodes) {
    if (!(node_capacity_row(c, node) == derive_capacity_row(c, node))) fail("capacity row drift on " + node);
    const VolumeGroup& vg = c.storage().vg(node, cfg.vg_name);
    MiB used = 0;
    for (const LogicalVolume* lv : c.storage().lvs_on(node)) used += lv->size;
    if (vg.free != vg.total - used) fail("vg free mismatch on " + node);
    if (vg.free < 0) fail("vg overcommitted on " + node);
  }

  // Simulated machines: VMs only on powered nodes, memory accounted.
  for (const auto& [node, sim] : c.world().nodes()) {
    MiB mem = 0;
    for (const auto& [vm, v] : sim.vms) {
      if (v.state == VmState::kRunning) mem += v.memory;
    }
    if (mem != sim.mem_used) fail("vm memory drift on " + node);
    if (!sim.reachable() && mem != 0) fail("vm running on powered-off " + node);
  }

  // Outside migration, no DRBD pair has two primaries.
  for (const auto& [uuid, p] : c.storage().pairs()) {
    if (p.primaries() > 1) fail("dual primary left on " + uuid);
  }
  return out;
}

struct RandomRun {
  std::unique_ptr<Cluster> cluster;
  /// Rendered job logs and rejections, in order.
  std::string log;
  int executed = 0;
  int rejected = 0;
  std::vector<std::string> violations;
};

/// `ops` random operations from `seed`. Each is validated first, as the job
/// engine does; rejected ones change nothing. Invariants are checked after
/// every operation.
inline RandomRun run_random_ops(std::uint32_t seed, int ops) {
  RandomRun r;
  r.cluster = make_lab_cluster(3, seed);
  Cluster& c = *r.cluster;
  JobRunner jobs(c);
  install_cd_and_iso(c, jobs);
  std::mt19937 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const std::vector<std::string> nodes = {kNode1, kNode2, kNode3};
  int next_vm = 0;
  Watermarks w;
  std::ostringstream log;

  auto any_instance = [&]() -> std::string {
    const auto& all = c.config().instances;
    if (all.empty()) return "vm-none";
    auto it = all.begin();
    std::advance(it, pick(0, static_cast<int>(all.size()) - 1));
    return it->first;
  };
  auto attempt = [&](const std::string& what, const std::function<void()>& check,
                     const std::function<void(JobLog&)>& run) {
    log << "# " << what << "\n";
    try {
      check();
    } catch (const Error& e) {
      ++r.rejected;
      log << "rejected " << e.name() << ": " << e.what() << "\n";
      return;
    }
    try {
      JobLog jl = jobs.run(run);
      for (const LogLine& l : jl.lines()) log << render_log_line(c.world().clock(), l) << "\n";
      ++r.executed;
    } catch (const Error& e) {
      ++r.rejected;
      log << "failed " << e.name() << ": " << e.what() << "\n";
    }
  };

  for (int step = 0; step < ops; ++step) {
    switch (pick(0, 19)) {
      case 0:
      case 1:
      case 2:
      case 3: {
        InstanceAddRequest req = pick(0, 3) == 0 ? plain_request("vm" + std::to_string(next_vm), 256, 128)
                                                 : drbd_request("vm" + std::to_string(next_vm), 256, 128);
        req.disks = {128 * pick(1, 32)};
        req.be.maxmem = 64 * pick(1, 6);
        req.be.minmem = std::min<MiB>(*req.be.maxmem, 64);
        req.start = pick(0, 4) != 0;
        if (pick(0, 2) == 0) req.node = nodes[static_cast<std::size_t>(pick(0, 2))];
        if (pick(0, 5) == 0) req.os = "image+cd";
        ++next_vm;
        // Nothing removes instances, so stop growing before memory runs out.
        if (c.config().instances.size() >= 24) break;
        attempt("add " + req.name, [&] { check_instance_add(c, req); }, [&](JobLog& l) { instance_add(c, l, req); });
        break;
      }
      case 4:
      case 5: {
        StartRequest req{any_instance(), {}};
        attempt("start " + req.name, [&] { check_instance_start(c, req); },
                [&](JobLog& l) { instance_start(c, l, req); });
        break;
      }
      case 6:
      case 7: {
        const std::string name = any_instance();
        attempt("shutdown " + name, [&] { check_instance_shutdown(c, name); },
                [&](JobLog& l) { instance_shutdown(c, l, name); });
        break;
      }
      case 8:
      case 9:
      case 10:
      case 11: {
        const std::string name = any_instance();
        attempt("migrate " + name, [&] { check_migrate(c, name); }, [&](JobLog& l) { migrate(c, l, name); });
        break;
      }
      case 12:
      case 13: {
        FailoverRequest req{any_instance(), pick(0, 1) == 1};
        attempt("failover " + req.name, [&] { check_failover(c, req); }, [&](JobLog& l) { failover(c, l, req); });
        break;
      }
      case 14:
      case 15: {
        NicModifyRequest req{any_instance(), 0, pick(0, 1) ? std::string(kMgmtBridge) : std::string(kPublicBridge),
                             pick(0, 1) == 1};
        attempt("modify " + req.name, [&] { check_modify_nic(c, req); },
                [&](JobLog& l) { modify_nic(c, l, req); });
        break;
      }
      case 16: {
        // The master stays up; the others come and go.
        const std::string& node = nodes[static_cast<std::size_t>(pick(1, 2))];
        // Outages are short: an off node comes back, an on node goes down
        // only half the time.
        const bool up = c.world().reachable(node);
        if (up && pick(0, 1) == 0) break;
        const Power p = up ? Power::kOff : Power::kOn;
        log << "# power " << node << " " << to_string(p) << "\n";
        c.world().set_node_power(node, p);
        break;
      }
      case 17:
      case 18: {
        const int seconds = pick(1, 600);
        log << "# advance " << seconds << "\n";
        c.advance(Millis{seconds * 1000LL});
        break;
      }
      default: {
        attempt("verify", [] {},
                [&](JobLog& l) {
                  verify_cluster(c, l);
                  verify_group(c, l);
                });
        break;
      }
    }
    for (std::string& v : invariant_violations(c, w)) {
      r.violations.push_back("step " + std::to_string(step) + ": " + v);
    }
  }
  r.log = log.str();
  return r;
}

}  // namespace gantry::testing
