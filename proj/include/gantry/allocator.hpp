#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gantry/cluster.hpp"

namespace gantry {

struct CapacityRow {
  std::string node;
  MiB dtotal = 0;
  MiB dfree = 0;
  MiB mtotal = 0;
  MiB mnode = 0;
  MiB mfree = 0;
  int pinst = 0;
  int sinst = 0;
  bool offline = false;

  bool operator==(const CapacityRow&) const = default;
};

/// Row from the incrementally maintained counters (VG free space, memory of
/// running VMs).
CapacityRow node_capacity_row(const Cluster& cluster, const std::string& node);
/// Same row recomputed from the LV list and instance records alone.
CapacityRow derive_capacity_row(const Cluster& cluster, const std::string& node);
std::vector<CapacityRow> capacity_rows(const Cluster& cluster);

struct PlacementSpec {
  DiskTemplate disk_template = DiskTemplate::kPlain;
  /// Data sizes; drbd adds a meta volume per disk on both nodes.
  std::vector<MiB> disks;
  MiB maxmem = 0;
};

struct Placement {
  std::string primary;
  std::optional<std::string> secondary;

  bool operator==(const Placement&) const = default;
};

/// Greedy placement: primary is the feasible node with the most free memory
/// (ties by name), the secondary the best of the rest.
Placement select_nodes(const Cluster& cluster, const PlacementSpec& spec,
                       const std::optional<std::string>& override_node = std::nullopt);

struct NodeMemory {
  std::string name;
  MiB mtotal = 0;
  MiB mnode = 0;
};

struct InstanceMemory {
  std::string name;
  std::string primary;
  std::optional<std::string> secondary;
  MiB maxmem = 0;
  bool running = false;
  DiskTemplate disk_template = DiskTemplate::kPlain;
};

struct MemoryModel {
  std::vector<NodeMemory> nodes;
  std::vector<InstanceMemory> instances;
};

MemoryModel memory_model(const Cluster& cluster);

struct NPlusOneViolation {
  std::string failed_node;
  MiB overflow = 0;

  bool operator==(const NPlusOneViolation&) const = default;
};

/// For each node, pretend it fails: its running drbd instances restart on
/// their secondaries, charged cumulatively against each secondary's free
/// memory. Reports the total shortfall per failure case; empty means the
/// cluster is N+1 redundant.
std::vector<NPlusOneViolation> check_n_plus_one(const MemoryModel& model);
std::vector<NPlusOneViolation> check_n_plus_one(const Cluster& cluster);

}  // namespace gantry
