#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gantry/cluster_model.hpp"
#include "gantry/simnode.hpp"
#include "gantry/storage.hpp"

namespace gantry {

/// Everything one simulated site holds: the machines (world), their storage,
/// and, once initialized, the cluster configuration.
class Cluster {
 public:
  explicit Cluster(std::int64_t epoch_unix = SimClock::kDefaultEpoch, std::uint64_t seed = 1);

  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  SimWorld& world() { return world_; }
  const SimWorld& world() const { return world_; }
  StorageState& storage() { return storage_; }
  const StorageState& storage() const { return storage_; }

  bool initialized() const { return config_.has_value(); }
  /// Throws kNotInitialized before cluster init.
  ClusterConfig& config();
  const ClusterConfig& config() const;
  void set_config(ClusterConfig config) { config_ = std::move(config); }

  std::uint64_t seed() const { return seed_; }
  Millis now() const { return world_.now(); }
  void advance(Millis dt) { world_.advance_clock(dt); }

  /// Job id that owns mutations right now (0 outside jobs).
  std::int64_t active_job() const { return active_job_; }
  void set_active_job(std::int64_t id);

  bool instance_running(const InstanceRecord& inst) const;
  AdminState actual_state(const InstanceRecord& inst) const {
    return instance_running(inst) ? AdminState::kUp : AdminState::kDown;
  }
  /// A member that is neither flagged offline nor powered off.
  bool node_online(const std::string& node) const;

  /// Pushes the config to its holders if it changed since the last push.
  void commit(JobLog* log);
  std::int64_t distributed_serial() const { return distributed_serial_; }
  void set_distributed_serial(std::int64_t s) { distributed_serial_ = s; }

 private:
  SimWorld world_;
  StorageState storage_;
  std::optional<ClusterConfig> config_;
  std::uint64_t seed_;
  std::int64_t active_job_ = 0;
  std::int64_t distributed_serial_ = 0;
};

}  // namespace gantry
