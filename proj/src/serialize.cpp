#include "gantry/serialize.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "gantry/error.hpp"

namespace gantry {

using nlohmann::json;

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

json disk_to_json(const DiskSpec& d) {
  json children = json::array();
  for (const auto& c : d.children) children.push_back({{"node", c.node}, {"vg", c.vg}, {"lv_name", c.lv_name}});
  return {{"uuid", d.uuid},         {"template", to_string(d.disk_template)},
          {"size", d.size},         {"access", d.access},
          {"node_a", d.node_a},     {"node_b", d.node_b},
          {"minor_a", d.minor_a},   {"minor_b", d.minor_b},
          {"port", d.port},         {"auth_key", d.auth_key},
          {"children", children}};
}

DiskSpec disk_from_json(const json& j) {
  DiskSpec d;
  d.uuid = j.at("uuid").get<std::string>();
  d.disk_template = parse_disk_template(j.at("template").get<std::string>());
  d.size = j.at("size").get<MiB>();
  d.access = j.at("access").get<std::string>();
  d.node_a = j.at("node_a").get<std::string>();
  d.node_b = j.at("node_b").get<std::string>();
  d.minor_a = j.at("minor_a").get<int>();
  d.minor_b = j.at("minor_b").get<int>();
  d.port = j.at("port").get<int>();
  d.auth_key = j.at("auth_key").get<std::string>();
  for (const auto& c : j.at("children")) {
    d.children.push_back({c.at("node").get<std::string>(), c.at("vg").get<std::string>(),
                          c.at("lv_name").get<std::string>()});
  }
  return d;
}

json instance_to_json(const InstanceRecord& i) {
  json nics = json::array();
  for (const auto& n : i.nics) {
    nics.push_back({{"mac", n.mac}, {"ip", opt(n.ip)}, {"mode", n.mode},
                    {"link", n.link}, {"uuid", n.uuid}, {"name", opt(n.name)}});
  }
  json disks = json::array();
  for (const auto& d : i.disks) disks.push_back(disk_to_json(d));
  return {{"name", i.name},
          {"uuid", i.uuid},
          {"serial", i.serial},
          {"ctime_ms", i.ctime.count()},
          {"mtime_ms", i.mtime.count()},
          {"admin_state", to_string(i.admin_state)},
          {"primary_node", i.primary_node},
          {"secondary_nodes", i.secondary_nodes},
          {"os", i.os_spec},
          {"hypervisor", i.hypervisor},
          {"hv_overrides", i.hv_overrides},
          {"be_params",
           {{"minmem", opt(i.be_params.minmem)},
            {"maxmem", opt(i.be_params.maxmem)},
            {"vcpus", opt(i.be_params.vcpus)},
            {"auto_balance", opt(i.be_params.auto_balance)},
            {"spindle_use", opt(i.be_params.spindle_use)}}},
          {"nics", nics},
          {"disk_template", to_string(i.disk_template)},
          {"disks", disks},
          {"network_port", i.network_port}};
}

InstanceRecord instance_from_json(const json& j) {
  InstanceRecord i;
  i.name = j.at("name").get<std::string>();
  i.uuid = j.at("uuid").get<std::string>();
  i.serial = j.at("serial").get<std::int64_t>();
  i.ctime = Millis{j.at("ctime_ms").get<std::int64_t>()};
  i.mtime = Millis{j.at("mtime_ms").get<std::int64_t>()};
  i.admin_state = parse_admin_state(j.at("admin_state").get<std::string>());
  i.primary_node = j.at("primary_node").get<std::string>();
  i.secondary_nodes = j.at("secondary_nodes").get<std::vector<std::string>>();
  i.os_spec = j.at("os").get<std::string>();
  i.hypervisor = j.at("hypervisor").get<std::string>();
  i.hv_overrides = j.at("hv_overrides").get<std::map<std::string, std::string>>();
  const json& be = j.at("be_params");
  i.be_params.minmem = get_opt<MiB>(be, "minmem");
  i.be_params.maxmem = get_opt<MiB>(be, "maxmem");
  i.be_params.vcpus = get_opt<int>(be, "vcpus");
  i.be_params.auto_balance = get_opt<bool>(be, "auto_balance");
  i.be_params.spindle_use = get_opt<int>(be, "spindle_use");
  for (const auto& n : j.at("nics")) {
    NicSpec nic;
    nic.mac = n.at("mac").get<std::string>();
    nic.ip = get_opt<std::string>(n, "ip");
    nic.mode = n.at("mode").get<std::string>();
    nic.link = n.at("link").get<std::string>();
    nic.uuid = n.at("uuid").get<std::string>();
    nic.name = get_opt<std::string>(n, "name");
    i.nics.push_back(nic);
  }
  i.disk_template = parse_disk_template(j.at("disk_template").get<std::string>());
  for (const auto& d : j.at("disks")) i.disks.push_back(disk_from_json(d));
  i.network_port = j.at("network_port").get<int>();
  return i;
}

DrbdRole parse_drbd_role(const std::string& s) {
  if (s == "primary") return DrbdRole::kPrimary;
  if (s == "secondary") return DrbdRole::kSecondary;
  throw Error(ErrorCode::kParseError, "unknown drbd role " + s);
}

DrbdConn parse_drbd_conn(const std::string& s) {
  if (s == "connected") return DrbdConn::kConnected;
  if (s == "standalone") return DrbdConn::kStandalone;
  throw Error(ErrorCode::kParseError, "unknown drbd connection state " + s);
}

DrbdDisk parse_drbd_disk(const std::string& s) {
  if (s == "up_to_date") return DrbdDisk::kUpToDate;
  if (s == "inconsistent") return DrbdDisk::kInconsistent;
  throw Error(ErrorCode::kParseError, "unknown drbd disk state " + s);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& p, const std::string& text) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kInvalidParams, "cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, p);
}

}  // namespace

json config_to_json(const ClusterConfig& c) {
  json nodes = json::object();
  for (const auto& [name, n] : c.nodes) {
    nodes[name] = {{"name", n.name},       {"uuid", n.uuid},         {"mgmt_ip", n.mgmt_ip},
                   {"role", to_string(n.role)}, {"offline", n.offline}, {"vg_total", n.vg_total},
                   {"mtotal", n.mtotal},   {"mnode", n.mnode},       {"minor_counter", n.minor_counter}};
  }
  json instances = json::object();
  for (const auto& [name, i] : c.instances) instances[name] = instance_to_json(i);
  return {{"cluster_name", c.cluster_name},
          {"master_node", c.master_node},
          {"master_netdev", c.master_netdev},
          {"enabled_hypervisors", c.enabled_hypervisors},
          {"hypervisor_params", c.hypervisor_params},
          {"default_nic_link", c.default_nic_link},
          {"vg_name", c.vg_name},
          {"port_counter", c.port_counter},
          {"config_serial", c.config_serial},
          {"hosts", c.hosts},
          {"rng_seed", c.rng_seed},
          {"rng_draws", c.rng_draws},
          {"group_uuid", c.group_uuid},
          {"candidate_pool_size", c.candidate_pool_size},
          {"ssl_cert_present", c.ssl_cert_present},
          {"sync_rate", c.sync_rate},
          {"sync_report_every", c.sync_report_every},
          {"migration_rate", c.migration_rate},
          {"migration_report_every", c.migration_report_every},
          {"nodes", nodes},
          {"instances", instances}};
}

ClusterConfig config_from_json(const json& j) {
  ClusterConfig c;
  c.cluster_name = j.at("cluster_name").get<std::string>();
  c.master_node = j.at("master_node").get<std::string>();
  c.master_netdev = j.at("master_netdev").get<std::string>();
  c.enabled_hypervisors = j.at("enabled_hypervisors").get<std::vector<std::string>>();
  c.hypervisor_params =
      j.at("hypervisor_params").get<std::map<std::string, std::map<std::string, std::string>>>();
  c.default_nic_link = j.at("default_nic_link").get<std::string>();
  c.vg_name = j.at("vg_name").get<std::string>();
  c.port_counter = j.at("port_counter").get<int>();
  c.config_serial = j.at("config_serial").get<std::int64_t>();
  c.hosts = j.at("hosts").get<std::map<std::string, std::string>>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.rng_draws = j.at("rng_draws").get<std::uint64_t>();
  c.group_uuid = j.at("group_uuid").get<std::string>();
  c.candidate_pool_size = j.at("candidate_pool_size").get<int>();
  c.ssl_cert_present = j.at("ssl_cert_present").get<bool>();
  c.sync_rate = j.at("sync_rate").get<double>();
  c.sync_report_every = j.at("sync_report_every").get<double>();
  c.migration_rate = j.at("migration_rate").get<double>();
  c.migration_report_every = j.at("migration_report_every").get<double>();
  for (const auto& [name, n] : j.at("nodes").items()) {
    NodeRecord r;
    r.name = n.at("name").get<std::string>();
    r.uuid = n.at("uuid").get<std::string>();
    r.mgmt_ip = n.at("mgmt_ip").get<std::string>();
    r.role = parse_node_role(n.at("role").get<std::string>());
    r.offline = n.at("offline").get<bool>();
    r.vg_total = n.at("vg_total").get<MiB>();
    r.mtotal = n.at("mtotal").get<MiB>();
    r.mnode = n.at("mnode").get<MiB>();
    r.minor_counter = n.at("minor_counter").get<int>();
    c.nodes[name] = r;
  }
  for (const auto& [name, i] : j.at("instances").items()) c.instances[name] = instance_from_json(i);
  return c;
}

json storage_to_json(const StorageState& s) {
  json vgs = json::array();
  for (const auto& [key, vg] : s.vgs()) {
    vgs.push_back({{"node", vg.node}, {"name", vg.name}, {"total", vg.total},
                   {"pv_count", vg.pv_count}, {"free", vg.free}});
  }
  json lvs = json::array();
  for (const auto& [key, lv] : s.lvs()) {
    lvs.push_back({{"node", lv.node},
                   {"vg", lv.vg},
                   {"lv_name", lv.lv_name},
                   {"size", lv.size},
                   {"role", to_string(lv.role)},
                   {"owner_disk", lv.owner_disk},
                   {"content_hash", lv.content_hash},
                   {"dm_minor", lv.dm_minor}});
  }
  json pairs = json::array();
  for (const auto& [uuid, p] : s.pairs()) {
    json sides = json::array();
    for (const auto& side : p.sides) {
      sides.push_back({{"node", side.node}, {"minor", side.minor}, {"role", to_string(side.role)},
                       {"conn", to_string(side.conn)}, {"disk", to_string(side.disk)}});
    }
    pairs.push_back({{"disk_uuid", p.disk_uuid},
                     {"size", p.size},
                     {"port", p.port},
                     {"sync_rate", p.sync_rate},
                     {"synced_units", p.synced_units},
                     {"dual_primary_allowed", p.dual_primary_allowed},
                     {"sides", sides}});
  }
  return {{"volume_groups", vgs}, {"logical_volumes", lvs}, {"drbd", pairs}};
}

void storage_from_json(const json& j, StorageState& s) {
  for (const auto& v : j.at("volume_groups")) {
    VolumeGroup& vg = s.create_volume_group(v.at("node").get<std::string>(),
                                            v.at("name").get<std::string>(), v.at("total").get<MiB>());
    vg.pv_count = v.at("pv_count").get<int>();
  }
  for (const auto& l : j.at("logical_volumes")) {
    LogicalVolume& lv =
        s.create_lv(l.at("node").get<std::string>(), l.at("vg").get<std::string>(),
                    l.at("lv_name").get<std::string>(), l.at("size").get<MiB>(),
                    l.at("role").get<std::string>() == "meta" ? LvRole::kMeta : LvRole::kData,
                    l.at("owner_disk").get<std::string>(), l.at("content_hash").get<std::uint64_t>());
    lv.dm_minor = l.at("dm_minor").get<int>();
  }
  for (const auto& v : j.at("volume_groups")) {
    const VolumeGroup& vg = s.vg(v.at("node").get<std::string>(), v.at("name").get<std::string>());
    if (vg.free != v.at("free").get<MiB>()) {
      throw Error(ErrorCode::kParseError, "volume group " + vg.node + "/" + vg.name +
                                              " free space disagrees with its volumes");
    }
  }
  for (const auto& pj : j.at("drbd")) {
    DrbdPair p;
    p.disk_uuid = pj.at("disk_uuid").get<std::string>();
    p.size = pj.at("size").get<MiB>();
    p.port = pj.at("port").get<int>();
    p.sync_rate = pj.at("sync_rate").get<double>();
    p.synced_units = pj.at("synced_units").get<std::int64_t>();
    p.dual_primary_allowed = pj.at("dual_primary_allowed").get<bool>();
    const json& sides = pj.at("sides");
    if (sides.size() != 2) throw Error(ErrorCode::kParseError, "drbd pair needs two sides");
    for (std::size_t k = 0; k < 2; ++k) {
      const json& sj = sides[k];
      p.sides[k] = {sj.at("node").get<std::string>(), sj.at("minor").get<int>(),
                    parse_drbd_role(sj.at("role").get<std::string>()),
                    parse_drbd_conn(sj.at("conn").get<std::string>()),
                    parse_drbd_disk(sj.at("disk").get<std::string>())};
    }
    s.add_pair(p);
  }
}

json world_to_json(const SimWorld& w) {
  json nodes = json::object();
  for (const auto& [name, n] : w.nodes()) {
    json vms = json::object();
    for (const auto& [vname, vm] : n.vms) {
      vms[vname] = {{"state", vm.state == VmState::kRunning ? "running" : "stopped"},
                    {"boot_order", to_string(vm.boot_order)},
                    {"cdrom_path", opt(vm.cdrom_path)},
                    {"console_port", vm.console_port},
                    {"memory", vm.memory},
                    {"bridge", vm.bridge},
                    {"address", vm.address}};
    }
    nodes[name] = {{"ip", n.ip},
                   {"power", to_string(n.power)},
                   {"mtotal", n.mtotal},
                   {"mnode", n.mnode},
                   {"mem_used", n.mem_used},
                   {"vms", vms},
                   {"files", n.files},
                   {"os_providers", n.os_providers},
                   {"config_serial", n.config_serial},
                   {"credentials", n.credentials}};
  }
  return {{"epoch_unix", w.clock().epoch_unix()},
          {"now_ms", w.now().count()},
          {"hosts", w.hosts()},
          {"nodes", nodes}};
}

std::string config_document(const Cluster& cluster) {
  json doc = {{"storage", storage_to_json(cluster.storage())}};
  if (cluster.initialized()) doc["cluster"] = config_to_json(cluster.config());
  return doc.dump(2) + "\n";
}

std::string sim_document(const Cluster& cluster) {
  json doc = world_to_json(cluster.world());
  doc["seed"] = cluster.seed();
  return doc.dump(2) + "\n";
}

namespace {

constexpr std::string_view kMirroredRoot = "/etc/ganeti/";

bool mirrored(const std::string& path) { return path.rfind(kMirroredRoot, 0) == 0; }

std::filesystem::path mirror_dir(const std::filesystem::path& dir, const std::string& node) {
  return dir / "nodes" / node / "etc" / "ganeti";
}

}  // namespace

void save_state(const Cluster& cluster, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "config.data", config_document(cluster));
  write_file_atomic(dir / "sim.json", sim_document(cluster));
  // OS definition files, laid out as on the machine for inspection and edits.
  for (const auto& [name, node] : cluster.world().nodes()) {
    const auto root = mirror_dir(dir, name);
    std::filesystem::remove_all(root);
    for (const auto& [path, content] : node.files) {
      if (!mirrored(path)) continue;
      const auto target = root / path.substr(kMirroredRoot.size());
      std::filesystem::create_directories(target.parent_path());
      write_file_atomic(target, content);
    }
  }
}

std::unique_ptr<Cluster> load_state(const std::filesystem::path& dir) {
  const auto sim_path = dir / "sim.json";
  const auto config_path = dir / "config.data";
  if (!std::filesystem::exists(sim_path)) return nullptr;
  json sim;
  json cfg;
  try {
    sim = json::parse(read_file(sim_path));
    if (std::filesystem::exists(config_path)) cfg = json::parse(read_file(config_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("corrupt state file: ") + e.what());
  }

  auto cluster = std::make_unique<Cluster>(sim.at("epoch_unix").get<std::int64_t>(),
                                           sim.at("seed").get<std::uint64_t>());
  SimWorld& w = cluster->world();
  w.advance_clock(Millis{sim.at("now_ms").get<std::int64_t>()});
  for (const auto& [fqdn, ip] : sim.at("hosts").items()) w.set_host(fqdn, ip.get<std::string>());
  for (const auto& [name, nj] : sim.at("nodes").items()) {
    SimNode& n = w.add_node(name, nj.at("ip").get<std::string>(), nj.at("mtotal").get<MiB>(),
                            nj.at("mnode").get<MiB>());
    n.power = parse_power(nj.at("power").get<std::string>());
    n.mem_used = nj.at("mem_used").get<MiB>();
    n.files = nj.at("files").get<std::map<std::string, std::string>>();
    n.os_providers = nj.at("os_providers").get<std::set<std::string>>();
    n.config_serial = nj.at("config_serial").get<std::int64_t>();
    n.credentials = nj.at("credentials").get<std::string>();
    // The on-disk tree wins over sim.json for OS definition files.
    const auto root = mirror_dir(dir, name);
    if (std::filesystem::is_directory(root)) {
      std::erase_if(n.files, [](const auto& kv) { return mirrored(kv.first); });
      for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(entry.path(), root).generic_string();
        n.files[std::string(kMirroredRoot) + rel] = read_file(entry.path());
      }
    }
    for (const auto& [vname, vj] : nj.at("vms").items()) {
      SimVm vm;
      vm.instance = vname;
      vm.state = vj.at("state").get<std::string>() == "running" ? VmState::kRunning : VmState::kStopped;
      vm.boot_order = parse_boot_order(vj.at("boot_order").get<std::string>());
      vm.cdrom_path = get_opt<std::string>(vj, "cdrom_path");
      vm.console_port = vj.at("console_port").get<int>();
      vm.memory = vj.at("memory").get<MiB>();
      vm.bridge = vj.at("bridge").get<std::string>();
      vm.address = vj.at("address").get<std::string>();
      n.vms[vname] = vm;
    }
  }
  if (!cfg.is_null()) {
    storage_from_json(cfg.at("storage"), cluster->storage());
    if (cfg.contains("cluster")) {
      cluster->set_config(config_from_json(cfg.at("cluster")));
      cluster->set_distributed_serial(cluster->config().config_serial);
    }
  }
  return cluster;
}

std::filesystem::path default_state_dir() {
  if (const char* dir = std::getenv("CLUSTER_STATE_DIR"); dir != nullptr && *dir != '\0') return dir;
  return "state";
}

}  // namespace gantry
