#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "gantry/cluster_model.hpp"
#include "gantry/job_log.hpp"
#include "gantry/sim_clock.hpp"

namespace gantry {

class SimWorld;

inline constexpr std::string_view kDefaultVgName = "ganeti";

struct VolumeGroup {
  std::string node;
  std::string name;
  MiB total = 0;
  int pv_count = 1;
  /// total minus the sizes of all LVs carved from it.
  MiB free = 0;
};

enum class LvRole { kData, kMeta };

std::string_view to_string(LvRole r);

struct LogicalVolume {
  std::string node;
  std::string vg;
  std::string lv_name;
  MiB size = 0;
  LvRole role = LvRole::kData;
  /// Disk that created this volume; empty for volumes made outside the
  /// cluster.
  std::string owner_disk;
  /// Stand-in for block contents.
  std::uint64_t content_hash = 0;
  /// Device-mapper minor: creation order among the node's volumes.
  int dm_minor = 0;
};

/// DRBD metadata volume size: 128 MiB plus 48 MiB per started GiB of data.
MiB drbd_meta_size(MiB data_size);

enum class DrbdRole { kPrimary, kSecondary };
enum class DrbdConn { kStandalone, kConnected };
enum class DrbdDisk { kInconsistent, kUpToDate };

std::string_view to_string(DrbdRole r);
std::string_view to_string(DrbdConn c);
std::string_view to_string(DrbdDisk d);

struct DrbdSide {
  std::string node;
  int minor = -1;
  DrbdRole role = DrbdRole::kSecondary;
  DrbdConn conn = DrbdConn::kConnected;
  DrbdDisk disk = DrbdDisk::kInconsistent;
};

struct DrbdPair {
  std::string disk_uuid;
  MiB size = 0;
  int port = 0;
  /// Resync rate in MiB/s.
  double sync_rate = 11.5;
  /// Resynced amount in millionths of a MiB, so split clock advances add up
  /// exactly.
  std::int64_t synced_units = 0;
  /// Set only while a migration job owns the pair.
  bool dual_primary_allowed = false;
  std::array<DrbdSide, 2> sides;

  double sync_percent() const;
  bool up_to_date() const;
  bool all_connected() const;
  bool syncing() const;
  int primaries() const;
  DrbdSide& side(const std::string& node);
  const DrbdSide& side(const std::string& node) const;
  const DrbdSide* primary_side() const;
  /// "connected, primary/secondary"
  std::string describe() const;
};

enum class TransitionKind { kDualPrimary, kSinglePrimary, kStandalone, kConnected, kSecondary, kNodeDown };

std::string_view to_string(TransitionKind k);

struct DrbdTransition {
  TransitionKind kind;
  /// Target node for kSinglePrimary / kSecondary.
  std::string node;

  static DrbdTransition dual_primary() { return {TransitionKind::kDualPrimary, {}}; }
  static DrbdTransition single_primary(std::string n) { return {TransitionKind::kSinglePrimary, std::move(n)}; }
  static DrbdTransition standalone() { return {TransitionKind::kStandalone, {}}; }
  static DrbdTransition connected() { return {TransitionKind::kConnected, {}}; }
  static DrbdTransition secondary(std::string n) { return {TransitionKind::kSecondary, std::move(n)}; }
};

/// One entry of the in-memory DRBD role history.
struct TransitionRecord {
  Millis at{0};
  std::int64_t job = 0;
  std::string disk_uuid;
  TransitionKind kind;
  std::string node;
  int primaries_after = 0;
};

struct ResyncReport {
  double percent = 0.0;
  Millis remaining{0};

  /// "16.85% done, 4m 56s remaining (estimated)"
  std::string text() const;
};

/// "4m 16s", "56s".
std::string format_remaining(Millis remaining);

/// Volume groups, logical volumes and DRBD pairs of every machine.
class StorageState {
 public:
  VolumeGroup& create_volume_group(const std::string& node, const std::string& name, MiB total);
  const VolumeGroup* find_vg(const std::string& node, const std::string& name) const;
  VolumeGroup& vg(const std::string& node, const std::string& name);
  const VolumeGroup& vg(const std::string& node, const std::string& name) const;

  LogicalVolume& create_lv(const std::string& node, const std::string& vg_name,
                           const std::string& lv_name, MiB size, LvRole role,
                           const std::string& owner_disk = {}, std::uint64_t content_hash = 0);
  const LogicalVolume* find_lv(const LvRef& ref) const;
  std::vector<const LogicalVolume*> lvs_on(const std::string& node) const;

  DrbdPair& add_pair(DrbdPair pair);
  bool has_pair(const std::string& disk_uuid) const { return pairs_.count(disk_uuid) != 0; }
  DrbdPair& pair(const std::string& disk_uuid);
  const DrbdPair& pair(const std::string& disk_uuid) const;

  /// Applies a role/connection transition; kIllegalTransition names the
  /// current and requested state.
  const DrbdPair& set_mode(const std::string& disk_uuid, const DrbdTransition& t, Millis at = {},
                           std::int64_t job = 0);

  /// Advances one syncing pair by `dt`.
  ResyncReport resync_tick(const std::string& disk_uuid, Millis dt);
  ResyncReport resync_report(const std::string& disk_uuid) const;
  /// Advances every syncing pair by `dt`.
  void advance(Millis dt);

  /// Crash semantics: the dead node's sides lose their role and every pair
  /// touching it drops to standalone.
  void on_node_down(const std::string& node, Millis at = {});

  const std::map<std::pair<std::string, std::string>, VolumeGroup>& vgs() const { return vgs_; }
  const std::map<std::tuple<std::string, std::string, std::string>, LogicalVolume>& lvs() const {
    return lvs_;
  }
  std::map<std::tuple<std::string, std::string, std::string>, LogicalVolume>& lvs() { return lvs_; }
  const std::map<std::string, DrbdPair>& pairs() const { return pairs_; }
  std::map<std::pair<std::string, std::string>, VolumeGroup>& vgs_mut() { return vgs_; }
  std::map<std::string, DrbdPair>& pairs_mut() { return pairs_; }

  /// Role history; not part of the persisted document.
  const std::vector<TransitionRecord>& transitions() const { return transitions_; }

 private:
  void record(const std::string& disk_uuid, const DrbdTransition& t, Millis at, std::int64_t job);

  std::map<std::pair<std::string, std::string>, VolumeGroup> vgs_;
  std::map<std::tuple<std::string, std::string, std::string>, LogicalVolume> lvs_;
  std::map<std::string, DrbdPair> pairs_;
  std::vector<TransitionRecord> transitions_;
};

/// Creates an instance disk: data LV (and for drbd a meta LV) on every
/// touched node, plus port, minors and auth key for drbd. A new pair starts
/// connected, inconsistent and 0% synced.
DiskSpec provision_instance_disks(ClusterConfig& config, StorageState& storage,
                                  DiskTemplate disk_template, MiB size,
                                  const std::string& primary,
                                  const std::optional<std::string>& secondary);

/// Takes the instance's disks down on `node`. An unreachable node gets one
/// warning per disk and the operation still succeeds.
void deactivate_disks(const ClusterConfig& config, StorageState& storage, const SimWorld& world,
                      const std::string& instance, const std::string& node, JobLog& log,
                      std::int64_t job = 0);

/// `vgs` output for one machine.
std::string render_vgs(const StorageState& storage, const std::string& node);
/// "137.87g"
std::string format_vgs_size(MiB size);

}  // namespace gantry
