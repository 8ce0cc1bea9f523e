#include "gantry/storage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gantry/error.hpp"
#include "gantry/simnode.hpp"

namespace gantry {
namespace {

constexpr std::int64_t kUnitsPerMiB = 1'000'000;

std::int64_t rate_units_per_ms(double rate) {
  // rate MiB/s is rate * 1000 millionths of a MiB per millisecond.
  return static_cast<std::int64_t>(std::llround(rate * 1000.0));
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string_view to_string(LvRole r) { return r == LvRole::kData ? "data" : "meta"; }
std::string_view to_string(DrbdRole r) { return r == DrbdRole::kPrimary ? "primary" : "secondary"; }
std::string_view to_string(DrbdConn c) { return c == DrbdConn::kConnected ? "connected" : "standalone"; }
std::string_view to_string(DrbdDisk d) { return d == DrbdDisk::kUpToDate ? "up_to_date" : "inconsistent"; }

std::string_view to_string(TransitionKind k) {
  switch (k) {
    case TransitionKind::kDualPrimary:
      return "dual_primary";
    case TransitionKind::kSinglePrimary:
      return "single_primary";
    case TransitionKind::kStandalone:
      return "standalone";
    case TransitionKind::kConnected:
      return "connected";
    case TransitionKind::kSecondary:
      return "secondary";
    case TransitionKind::kNodeDown:
      return "node_down";
  }
  return "?";
}

MiB drbd_meta_size(MiB data_size) {
  MiB gib = (data_size + 1023) / 1024;
  return 128 + 48 * gib;
}

double DrbdPair::sync_percent() const {
  if (size <= 0) return 100.0;
  if (synced_units >= size * kUnitsPerMiB) return 100.0;
  return 100.0 * static_cast<double>(synced_units) / static_cast<double>(size * kUnitsPerMiB);
}

bool DrbdPair::up_to_date() const {
  return std::all_of(sides.begin(), sides.end(),
                     [](const DrbdSide& s) { return s.disk == DrbdDisk::kUpToDate; });
}

bool DrbdPair::all_connected() const {
  return std::all_of(sides.begin(), sides.end(),
                     [](const DrbdSide& s) { return s.conn == DrbdConn::kConnected; });
}

bool DrbdPair::syncing() const { return all_connected() && !up_to_date(); }

int DrbdPair::primaries() const {
  return static_cast<int>(std::count_if(sides.begin(), sides.end(),
                                        [](const DrbdSide& s) { return s.role == DrbdRole::kPrimary; }));
}

DrbdSide& DrbdPair::side(const std::string& node) {
  for (auto& s : sides) {
    if (s.node == node) return s;
  }
  throw Error(ErrorCode::kUnknownNode, "disk " + disk_uuid + " has no replica on " + node);
}

const DrbdSide& DrbdPair::side(const std::string& node) const {
  for (const auto& s : sides) {
    if (s.node == node) return s;
  }
  throw Error(ErrorCode::kUnknownNode, "disk " + disk_uuid + " has no replica on " + node);
}

const DrbdSide* DrbdPair::primary_side() const {
  for (const auto& s : sides) {
    if (s.role == DrbdRole::kPrimary) return &s;
  }
  return nullptr;
}

std::string DrbdPair::describe() const {
  std::string conn = all_connected() ? "connected"
                     : std::all_of(sides.begin(), sides.end(),
                                   [](const DrbdSide& s) { return s.conn == DrbdConn::kStandalone; })
                         ? "standalone"
                         : "partially connected";
  return conn + ", " + std::string(to_string(sides[0].role)) + "/" +
         std::string(to_string(sides[1].role));
}

std::string format_remaining(Millis remaining) {
  std::int64_t secs = (remaining.count() + 500) / 1000;
  if (secs < 60) return std::to_string(secs) + "s";
  return std::to_string(secs / 60) + "m " + std::to_string(secs % 60) + "s";
}

std::string ResyncReport::text() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", percent);
  return std::string(buf) + " done, " + format_remaining(remaining) + " remaining (estimated)";
}

VolumeGroup& StorageState::create_volume_group(const std::string& node, const std::string& name,
                                               MiB total) {
  auto key = std::make_pair(node, name);
  if (vgs_.count(key) != 0) {
    throw Error(ErrorCode::kDuplicateVg, "Volume group \"" + name + "\" already exists on " + node);
  }
  if (total <= 0) throw Error(ErrorCode::kInvalidParams, "volume group size must be positive");
  VolumeGroup vg{node, name, total, 1, total};
  return vgs_.emplace(key, vg).first->second;
}

const VolumeGroup* StorageState::find_vg(const std::string& node, const std::string& name) const {
  auto it = vgs_.find({node, name});
  return it == vgs_.end() ? nullptr : &it->second;
}

VolumeGroup& StorageState::vg(const std::string& node, const std::string& name) {
  auto it = vgs_.find({node, name});
  if (it == vgs_.end()) {
    throw Error(ErrorCode::kVgMissing, "Volume group \"" + name + "\" not found on " + node);
  }
  return it->second;
}

const VolumeGroup& StorageState::vg(const std::string& node, const std::string& name) const {
  auto it = vgs_.find({node, name});
  if (it == vgs_.end()) {
    throw Error(ErrorCode::kVgMissing, "Volume group \"" + name + "\" not found on " + node);
  }
  return it->second;
}

LogicalVolume& StorageState::create_lv(const std::string& node, const std::string& vg_name,
                                       const std::string& lv_name, MiB size, LvRole role,
                                       const std::string& owner_disk, std::uint64_t content_hash) {
  VolumeGroup& group = vg(node, vg_name);
  auto key = std::make_tuple(node, vg_name, lv_name);
  if (lvs_.count(key) != 0) {
    throw Error(ErrorCode::kInvalidParams, "logical volume " + vg_name + "/" + lv_name +
                                               " already exists on " + node);
  }
  if (size <= 0) throw Error(ErrorCode::kInvalidParams, "logical volume size must be positive");
  if (group.free < size) {
    throw Error(ErrorCode::kInsufficientSpace,
                "Not enough free space on node " + node + ": need " + std::to_string(size) +
                    " MiB, have " + std::to_string(group.free) + " MiB");
  }
  group.free -= size;
  int dm_minor = 0;
  for (const auto& [k, existing] : lvs_) {
    if (existing.node == node) dm_minor = std::max(dm_minor, existing.dm_minor + 1);
  }
  LogicalVolume lv{node, vg_name, lv_name, size, role, owner_disk, content_hash, dm_minor};
  return lvs_.emplace(key, std::move(lv)).first->second;
}

const LogicalVolume* StorageState::find_lv(const LvRef& ref) const {
  auto it = lvs_.find({ref.node, ref.vg, ref.lv_name});
  return it == lvs_.end() ? nullptr : &it->second;
}

std::vector<const LogicalVolume*> StorageState::lvs_on(const std::string& node) const {
  std::vector<const LogicalVolume*> out;
  for (const auto& [key, lv] : lvs_) {
    if (std::get<0>(key) == node) out.push_back(&lv);
  }
  return out;
}

DrbdPair& StorageState::add_pair(DrbdPair pair) {
  std::string id = pair.disk_uuid;
  return pairs_.insert_or_assign(id, std::move(pair)).first->second;
}

DrbdPair& StorageState::pair(const std::string& disk_uuid) {
  auto it = pairs_.find(disk_uuid);
  if (it == pairs_.end()) throw Error(ErrorCode::kUnknownDisk, "unknown DRBD disk " + disk_uuid);
  return it->second;
}

const DrbdPair& StorageState::pair(const std::string& disk_uuid) const {
  auto it = pairs_.find(disk_uuid);
  if (it == pairs_.end()) throw Error(ErrorCode::kUnknownDisk, "unknown DRBD disk " + disk_uuid);
  return it->second;
}

void StorageState::record(const std::string& disk_uuid, const DrbdTransition& t, Millis at,
                          std::int64_t job) {
  transitions_.push_back({at, job, disk_uuid, t.kind, t.node, pairs_.at(disk_uuid).primaries()});
}

const DrbdPair& StorageState::set_mode(const std::string& disk_uuid, const DrbdTransition& t,
                                       Millis at, std::int64_t job) {
  DrbdPair& p = pair(disk_uuid);
  auto illegal = [&]() {
    std::string requested(to_string(t.kind));
    if (!t.node.empty()) requested += "(" + t.node + ")";
    return Error(ErrorCode::kIllegalTransition,
                 "illegal DRBD transition on disk " + disk_uuid + ": " + requested + " from " +
                     p.describe());
  };
  const bool any_connected = std::any_of(p.sides.begin(), p.sides.end(), [](const DrbdSide& s) {
    return s.conn == DrbdConn::kConnected;
  });
  switch (t.kind) {
    case TransitionKind::kStandalone:
      if (!any_connected || p.primaries() > 1) throw illegal();
      for (auto& s : p.sides) s.conn = DrbdConn::kStandalone;
      break;
    case TransitionKind::kConnected:
      if (any_connected) throw illegal();
      for (auto& s : p.sides) s.conn = DrbdConn::kConnected;
      break;
    case TransitionKind::kDualPrimary:
      if (!p.all_connected() || p.primaries() != 1 || !p.dual_primary_allowed) throw illegal();
      for (auto& s : p.sides) s.role = DrbdRole::kPrimary;
      break;
    case TransitionKind::kSinglePrimary: {
      DrbdSide& target = p.side(t.node);
      if (p.primaries() == 2 && p.all_connected()) {
        for (auto& s : p.sides) s.role = DrbdRole::kSecondary;
        target.role = DrbdRole::kPrimary;
      } else if (p.primaries() == 0) {
        target.role = DrbdRole::kPrimary;
      } else {
        throw illegal();
      }
      break;
    }
    case TransitionKind::kSecondary:
      p.side(t.node).role = DrbdRole::kSecondary;
      break;
    case TransitionKind::kNodeDown:
      throw illegal();
  }
  record(disk_uuid, t, at, job);
  return p;
}

ResyncReport StorageState::resync_report(const std::string& disk_uuid) const {
  const DrbdPair& p = pair(disk_uuid);
  ResyncReport r;
  r.percent = p.sync_percent();
  std::int64_t left = std::max<std::int64_t>(0, p.size * kUnitsPerMiB - p.synced_units);
  std::int64_t per_ms = rate_units_per_ms(p.sync_rate);
  r.remaining = Millis{per_ms > 0 ? (left + per_ms - 1) / per_ms : 0};
  return r;
}

ResyncReport StorageState::resync_tick(const std::string& disk_uuid, Millis dt) {
  if (dt.count() < 0) throw Error(ErrorCode::kNegativeDt, "negative resync interval");
  DrbdPair& p = pair(disk_uuid);
  if (!p.syncing()) {
    throw Error(ErrorCode::kNotSyncing, "disk " + disk_uuid + " is not resynchronizing (" +
                                            p.describe() + ")");
  }
  const std::int64_t cap = p.size * kUnitsPerMiB;
  p.synced_units = std::min(cap, p.synced_units + rate_units_per_ms(p.sync_rate) * dt.count());
  if (p.synced_units >= cap) {
    for (auto& s : p.sides) s.disk = DrbdDisk::kUpToDate;
  }
  return resync_report(disk_uuid);
}

void StorageState::advance(Millis dt) {
  for (auto& [uuid, p] : pairs_) {
    if (p.syncing()) resync_tick(uuid, dt);
  }
}

void StorageState::on_node_down(const std::string& node, Millis at) {
  for (auto& [uuid, p] : pairs_) {
    bool touches = std::any_of(p.sides.begin(), p.sides.end(),
                               [&](const DrbdSide& s) { return s.node == node; });
    if (!touches) continue;
    for (auto& s : p.sides) {
      s.conn = DrbdConn::kStandalone;
      if (s.node == node) s.role = DrbdRole::kSecondary;
    }
    record(uuid, {TransitionKind::kNodeDown, node}, at, 0);
  }
}

DiskSpec provision_instance_disks(ClusterConfig& config, StorageState& storage,
                                  DiskTemplate disk_template, MiB size, const std::string& primary,
                                  const std::optional<std::string>& secondary) {
  if (size <= 0) throw Error(ErrorCode::kInvalidParams, "disk size must be positive");
  config.node(primary);
  if (disk_template == DiskTemplate::kDrbd) {
    if (!secondary) throw Error(ErrorCode::kInvalidParams, "drbd disks need a secondary node");
    config.node(*secondary);
    if (*secondary == primary) {
      throw Error(ErrorCode::kInvalidParams, "primary and secondary node must differ");
    }
  }
  const std::string& vg_name = config.vg_name;
  const MiB meta = disk_template == DiskTemplate::kDrbd ? drbd_meta_size(size) : 0;
  std::vector<std::string> touched{primary};
  if (disk_template == DiskTemplate::kDrbd) touched.push_back(*secondary);
  for (const auto& n : touched) {
    const VolumeGroup* group = storage.find_vg(n, vg_name);
    if (group == nullptr) {
      throw Error(ErrorCode::kVgMissing, "Volume group \"" + vg_name + "\" not found on " + n);
    }
    if (group->free < size + meta) {
      throw Error(ErrorCode::kInsufficientSpace,
                  "Not enough free space on node " + n + ": need " + std::to_string(size + meta) +
                      " MiB, have " + std::to_string(group->free) + " MiB");
    }
  }

  DiskSpec disk;
  disk.uuid = generate_identity(config, IdentityKind::kUuid);
  disk.disk_template = disk_template;
  disk.size = size;
  const std::uint64_t content = fnv1a(disk.uuid);
  const std::string data_name = disk.uuid + ".disk_data";
  const std::string meta_name = disk.uuid + ".disk_meta";

  if (disk_template == DiskTemplate::kPlain) {
    storage.create_lv(primary, vg_name, data_name, size, LvRole::kData, disk.uuid, content);
    disk.node_a = primary;
    disk.children.push_back({primary, vg_name, data_name});
    config.bump_serial();
    return disk;
  }

  disk.node_a = primary;
  disk.node_b = *secondary;
  disk.port = allocate_network_port(config);
  disk.minor_a = allocate_drbd_minor(config, disk.node_a);
  disk.minor_b = allocate_drbd_minor(config, disk.node_b);
  disk.auth_key = generate_identity(config, IdentityKind::kAuthKey);
  for (const auto& n : touched) {
    storage.create_lv(n, vg_name, data_name, size, LvRole::kData, disk.uuid, content);
    storage.create_lv(n, vg_name, meta_name, meta, LvRole::kMeta, disk.uuid);
    disk.children.push_back({n, vg_name, data_name});
    disk.children.push_back({n, vg_name, meta_name});
  }

  DrbdPair pair;
  pair.disk_uuid = disk.uuid;
  pair.size = size;
  pair.port = disk.port;
  pair.sync_rate = config.sync_rate;
  pair.sides[0] = {disk.node_a, disk.minor_a, DrbdRole::kSecondary, DrbdConn::kConnected,
                   DrbdDisk::kInconsistent};
  pair.sides[1] = {disk.node_b, disk.minor_b, DrbdRole::kSecondary, DrbdConn::kConnected,
                   DrbdDisk::kInconsistent};
  storage.add_pair(std::move(pair));
  config.bump_serial();
  return disk;
}

void deactivate_disks(const ClusterConfig& config, StorageState& storage, const SimWorld& world,
                      const std::string& instance, const std::string& node, JobLog& log,
                      std::int64_t job) {
  const InstanceRecord& inst = config.instance(instance);
  const bool alive = world.reachable(node);
  for (std::size_t i = 0; i < inst.disks.size(); ++i) {
    const DiskSpec& disk = inst.disks[i];
    bool placed = std::any_of(disk.children.begin(), disk.children.end(),
                              [&](const LvRef& r) { return r.node == node; });
    if (!placed) continue;
    if (!alive) {
      log.warning("Could not shutdown block device disk/" + std::to_string(i) + " on node " +
                  node + ": " + no_route_error(config.node(node).mgmt_ip));
    }
    if (disk.disk_template == DiskTemplate::kDrbd && storage.has_pair(disk.uuid)) {
      DrbdPair& p = storage.pair(disk.uuid);
      if (alive) {
        storage.set_mode(disk.uuid, DrbdTransition::secondary(node), log.clock().now(), job);
      } else {
        DrbdSide& s = p.side(node);
        s.role = DrbdRole::kSecondary;
        s.conn = DrbdConn::kStandalone;
      }
    }
  }
}

std::string format_vgs_size(MiB size) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2fg", static_cast<double>(size) / 1024.0);
  return buf;
}

std::string render_vgs(const StorageState& storage, const std::string& node) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-7s %3s %3s %3s %-6s %7s %7s\n", "VG", "#PV", "#LV", "#SN",
                "Attr", "VSize", "VFree");
  out << line;
  for (const auto& [key, vg] : storage.vgs()) {
    if (key.first != node) continue;
    int lv_count = 0;
    for (const auto& [lkey, _] : storage.lvs()) {
      if (std::get<0>(lkey) == node && std::get<1>(lkey) == vg.name) ++lv_count;
    }
    std::snprintf(line, sizeof(line), "%-7s %3d %3d %3d %-6s %7s %7s\n", vg.name.c_str(),
                  vg.pv_count, lv_count, 0, "wz--n-", format_vgs_size(vg.total).c_str(),
                  format_vgs_size(vg.free).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace gantry
