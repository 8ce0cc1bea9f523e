#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "gantry/cluster.hpp"
#include "json.hpp"

namespace gantry {

nlohmann::json config_to_json(const ClusterConfig& config);
ClusterConfig config_from_json(const nlohmann::json& j);

nlohmann::json storage_to_json(const StorageState& storage);
void storage_from_json(const nlohmann::json& j, StorageState& storage);

nlohmann::json world_to_json(const SimWorld& world);

/// The replicated document: cluster config plus the storage layer, keys in
/// sorted order so equal states serialize to identical bytes.
std::string config_document(const Cluster& cluster);
/// The simulated machines: clock, power, VMs, files, hosts table.
std::string sim_document(const Cluster& cluster);

/// Writes config.data (when initialized) and sim.json into `dir`.
void save_state(const Cluster& cluster, const std::filesystem::path& dir);
/// nullptr when `dir` holds no saved state.
std::unique_ptr<Cluster> load_state(const std::filesystem::path& dir);

/// CLUSTER_STATE_DIR, else "./state".
std::filesystem::path default_state_dir();

}  // namespace gantry
