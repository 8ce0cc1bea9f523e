#pragma once

#include <string>
#include <vector>

#include "gantry/cluster.hpp"

namespace gantry {

inline constexpr std::string_view kLabDomain = "project.edu";
inline constexpr std::string_view kLabClusterName = "cluster.project.edu";
inline constexpr std::string_view kLabIso = "/iso/debian-7.9.0-amd64-netinst.iso";
/// One 137.87g physical volume turned into the "ganeti" VG.
inline constexpr MiB kLabVgSize = 141179;

struct LabNode {
  std::string name;
  std::string ip;
  MiB mtotal = 0;
  MiB mnode = 0;
  MiB vg_size = kLabVgSize;
};

/// The three-machine classroom lab: node1 (2.4G, 246M reserved), node2 and
/// node3 (2.0G, 94M reserved) on 192.168.20.0/24.
std::vector<LabNode> default_lab_nodes();

/// Racks the machines: hosts entries (plus the cluster name), powered-on
/// nodes with the default OS definitions, and a "ganeti" VG on each.
void setup_lab(Cluster& cluster, const std::vector<LabNode>& nodes = default_lab_nodes());

/// cd.conf and the two-line variants.list, as edited on the master before
/// copyfile.
inline constexpr std::string_view kCdVariantConfig = "CDINSTALL=\"yes\"\nNOMOUNT=\"yes\"\n";
inline constexpr std::string_view kCdVariantsList = "default\ncd\n";
void write_cd_variant(SimNode& node);

}  // namespace gantry
