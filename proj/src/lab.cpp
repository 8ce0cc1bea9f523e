#include "gantry/lab.hpp"

#include "gantry/os_catalog.hpp"

namespace gantry {

std::vector<LabNode> default_lab_nodes() {
  return {
      {"node1.project.edu", "192.168.20.222", 2458, 246},
      {"node2.project.edu", "192.168.20.223", 2048, 94},
      {"node3.project.edu", "192.168.20.224", 2048, 94},
  };
}

void setup_lab(Cluster& cluster, const std::vector<LabNode>& nodes) {
  SimWorld& world = cluster.world();
  world.set_host(std::string(kLabClusterName), "192.168.20.220");
  for (const LabNode& n : nodes) {
    world.set_host(n.name, n.ip);
    world.add_node(n.name, n.ip, n.mtotal, n.mnode);
    cluster.storage().create_volume_group(n.name, std::string(kDefaultVgName), n.vg_size);
  }
}

void write_cd_variant(SimNode& node) {
  node.files[os_variant_config_path("image", "cd")] = std::string(kCdVariantConfig);
  node.files[os_variants_list_path("image")] = std::string(kCdVariantsList);
}

}  // namespace gantry
