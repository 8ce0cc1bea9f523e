#include "gantry/cluster.hpp"

#include "gantry/error.hpp"

namespace gantry {

Cluster::Cluster(std::int64_t epoch_unix, std::uint64_t seed) : world_(epoch_unix), seed_(seed) {
  world_.set_advance_hook([this](Millis dt) { storage_.advance(dt); });
  world_.set_power_hook([this](const std::string& node, Power p) {
    if (p == Power::kOff) storage_.on_node_down(node, world_.now());
  });
}

ClusterConfig& Cluster::config() {
  if (!config_) throw Error(ErrorCode::kNotInitialized, "Cluster not initialized yet");
  return *config_;
}

const ClusterConfig& Cluster::config() const {
  if (!config_) throw Error(ErrorCode::kNotInitialized, "Cluster not initialized yet");
  return *config_;
}

void Cluster::set_active_job(std::int64_t id) {
  active_job_ = id;
  if (config_) config_->active_job = id;
}

bool Cluster::instance_running(const InstanceRecord& inst) const {
  auto host = world_.vm_host(inst.name);
  return host && *host == inst.primary_node;
}

bool Cluster::node_online(const std::string& node) const {
  if (!config_ || !config_->has_node(node)) return false;
  return !config_->node(node).offline && world_.reachable(node);
}

void Cluster::commit(JobLog* log) {
  if (!config_ || config_->config_serial == distributed_serial_) return;
  distribute_config(*config_, world_, log);
  distributed_serial_ = config_->config_serial;
}

}  // namespace gantry
