#include "gantry/allocator.hpp"

#include <algorithm>
#include <map>

#include "gantry/error.hpp"

namespace gantry {
namespace {

MiB required_disk(const PlacementSpec& spec) {
  MiB total = 0;
  for (MiB d : spec.disks) {
    total += d;
    if (spec.disk_template == DiskTemplate::kDrbd) total += drbd_meta_size(d);
  }
  return total;
}

void count_placements(const ClusterConfig& config, CapacityRow& row) {
  for (const auto& [name, inst] : config.instances) {
    if (inst.primary_node == row.node) ++row.pinst;
    for (const auto& s : inst.secondary_nodes) {
      if (s == row.node) ++row.sinst;
    }
  }
}

}  // namespace

CapacityRow node_capacity_row(const Cluster& cluster, const std::string& node) {
  const ClusterConfig& config = cluster.config();
  const NodeRecord& rec = config.node(node);
  const SimNode& sim = cluster.world().node(node);
  CapacityRow row;
  row.node = node;
  if (const VolumeGroup* vg = cluster.storage().find_vg(node, config.vg_name)) {
    row.dtotal = vg->total;
    row.dfree = vg->free;
  }
  row.mtotal = sim.mtotal;
  row.mnode = sim.mnode;
  row.mfree = sim.mtotal - sim.mnode - sim.mem_used;
  row.offline = rec.offline || !sim.reachable();
  count_placements(config, row);
  return row;
}

CapacityRow derive_capacity_row(const Cluster& cluster, const std::string& node) {
  const ClusterConfig& config = cluster.config();
  const NodeRecord& rec = config.node(node);
  CapacityRow row;
  row.node = node;
  if (const VolumeGroup* vg = cluster.storage().find_vg(node, config.vg_name)) {
    row.dtotal = vg->total;
    MiB used = 0;
    for (const auto& [key, lv] : cluster.storage().lvs()) {
      if (lv.node == node && lv.vg == config.vg_name) used += lv.size;
    }
    row.dfree = row.dtotal - used;
  }
  row.mtotal = rec.mtotal;
  row.mnode = rec.mnode;
  row.mfree = rec.mtotal - rec.mnode;
  for (const auto& [name, inst] : config.instances) {
    if (inst.primary_node == node && cluster.instance_running(inst)) row.mfree -= inst.maxmem();
  }
  row.offline = rec.offline || !cluster.world().reachable(node);
  count_placements(config, row);
  return row;
}

std::vector<CapacityRow> capacity_rows(const Cluster& cluster) {
  std::vector<CapacityRow> rows;
  for (const auto& [name, rec] : cluster.config().nodes) rows.push_back(node_capacity_row(cluster, name));
  return rows;
}

Placement select_nodes(const Cluster& cluster, const PlacementSpec& spec,
                       const std::optional<std::string>& override_node) {
  const ClusterConfig& config = cluster.config();
  const MiB disk = required_disk(spec);
  const bool drbd = spec.disk_template == DiskTemplate::kDrbd;
  const std::size_t needed = drbd ? 2 : 1;

  int online = 0;
  int disk_ok = 0;
  MiB best_mfree = 0;
  MiB best_dfree = 0;
  std::vector<CapacityRow> candidates;
  for (const auto& [name, rec] : config.nodes) {
    if (!cluster.node_online(name)) continue;
    ++online;
    CapacityRow row = node_capacity_row(cluster, name);
    best_dfree = std::max(best_dfree, row.dfree);
    if (row.dfree < disk) continue;
    ++disk_ok;
    best_mfree = std::max(best_mfree, row.mfree);
    if (row.mfree < spec.maxmem) continue;
    candidates.push_back(row);
  }
  std::sort(candidates.begin(), candidates.end(), [](const CapacityRow& a, const CapacityRow& b) {
    if (a.mfree != b.mfree) return a.mfree > b.mfree;
    return a.node < b.node;
  });

  auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorCode::kNoFeasiblePlacement,
                 "Can't find " + std::to_string(needed) + " node(s) with " + std::to_string(disk) +
                     " MiB disk and " + std::to_string(spec.maxmem) + " MiB memory free: " + why);
  };
  auto binding = [&]() -> std::string {
    if (online < static_cast<int>(needed)) return "only " + std::to_string(online) + " online node(s)";
    if (disk_ok < static_cast<int>(needed))
      return "disk is the binding constraint (largest free " + std::to_string(best_dfree) + " MiB)";
    return "memory is the binding constraint (largest free " + std::to_string(best_mfree) + " MiB)";
  };

  Placement out;
  if (override_node) {
    config.node(*override_node);
    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [&](const CapacityRow& r) { return r.node == *override_node; });
    if (it == candidates.end()) {
      if (!cluster.node_online(*override_node)) throw fail("node " + *override_node + " is offline");
      throw fail("node " + *override_node + " lacks capacity");
    }
    out.primary = *override_node;
    if (drbd) {
      for (const auto& r : candidates) {
        if (r.node != out.primary) {
          out.secondary = r.node;
          break;
        }
      }
      if (!out.secondary) throw fail(binding());
    }
    return out;
  }

  if (candidates.size() < needed) throw fail(binding());
  out.primary = candidates[0].node;
  if (drbd) out.secondary = candidates[1].node;
  return out;
}

MemoryModel memory_model(const Cluster& cluster) {
  const ClusterConfig& config = cluster.config();
  MemoryModel model;
  for (const auto& [name, rec] : config.nodes) model.nodes.push_back({name, rec.mtotal, rec.mnode});
  for (const auto& [name, inst] : config.instances) {
    model.instances.push_back({name, inst.primary_node, inst.secondary(), inst.maxmem(),
                               cluster.instance_running(inst), inst.disk_template});
  }
  return model;
}

std::vector<NPlusOneViolation> check_n_plus_one(const MemoryModel& model) {
  std::map<std::string, MiB> mfree;
  for (const auto& n : model.nodes) mfree[n.name] = n.mtotal - n.mnode;
  for (const auto& i : model.instances) {
    if (i.running && mfree.count(i.primary) != 0) mfree[i.primary] -= i.maxmem;
  }

  std::vector<NPlusOneViolation> out;
  for (const auto& failed : model.nodes) {
    std::map<std::string, MiB> load;
    for (const auto& i : model.instances) {
      if (i.primary != failed.name || !i.running || i.disk_template != DiskTemplate::kDrbd) continue;
      if (!i.secondary || mfree.count(*i.secondary) == 0) continue;
      load[*i.secondary] += i.maxmem;
    }
    MiB overflow = 0;
    for (const auto& [node, need] : load) overflow += std::max<MiB>(0, need - mfree[node]);
    if (overflow > 0) out.push_back({failed.name, overflow});
  }
  return out;
}

std::vector<NPlusOneViolation> check_n_plus_one(const Cluster& cluster) {
  return check_n_plus_one(memory_model(cluster));
}

}  // namespace gantry
