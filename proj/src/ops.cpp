#include <cmath>
#include <sstream>

#include "gantry/error.hpp"
#include "gantry/jobs.hpp"
#include "gantry/lab.hpp"
#include "gantry/lifecycle.hpp"
#include "gantry/membership.hpp"

namespace gantry {

using nlohmann::json;

namespace {

Error bad_param(const std::string& key, const std::string& what) {
  return Error(ErrorCode::kInvalidParams, "Parameter '" + key + "' " + what);
}

const json& need(const json& p, const std::string& key) {
  if (!p.is_object() || !p.contains(key) || p.at(key).is_null()) throw bad_param(key, "is required");
  return p.at(key);
}

std::string str(const json& p, const std::string& key) {
  const json& v = need(p, key);
  if (!v.is_string()) throw bad_param(key, "must be a string");
  return v.get<std::string>();
}

std::optional<std::string> opt_str(const json& p, const std::string& key) {
  if (!p.is_object() || !p.contains(key) || p.at(key).is_null()) return std::nullopt;
  return str(p, key);
}

bool flag(const json& p, const std::string& key, bool fallback) {
  if (!p.is_object() || !p.contains(key) || p.at(key).is_null()) return fallback;
  if (!p.at(key).is_boolean()) throw bad_param(key, "must be a boolean");
  return p.at(key).get<bool>();
}

std::int64_t integer(const json& p, const std::string& key) {
  const json& v = need(p, key);
  if (!v.is_number_integer()) throw bad_param(key, "must be an integer");
  return v.get<std::int64_t>();
}

/// A size given as MiB or as "4G"/"256M" text.
MiB size_value(const json& v, const std::string& key) {
  if (v.is_number_integer()) return v.get<MiB>();
  if (v.is_string()) {
    try {
      return parse_size(v.get<std::string>());
    } catch (const Error& e) {
      throw bad_param(key, e.what());
    }
  }
  throw bad_param(key, "must be a size");
}

/// "k=v,k=v" text or a flat object of scalars.
std::map<std::string, std::string> kv_map(const json& p, const std::string& key) {
  std::map<std::string, std::string> out;
  if (!p.is_object() || !p.contains(key) || p.at(key).is_null()) return out;
  const json& v = p.at(key);
  if (v.is_string()) {
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      auto eq = item.find('=');
      if (eq == std::string::npos) throw bad_param(key, "entry '" + item + "' lacks '='");
      out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
  }
  if (!v.is_object()) throw bad_param(key, "must be an object or k=v text");
  for (const auto& [k, x] : v.items()) {
    if (x.is_string()) {
      out[k] = x.get<std::string>();
    } else if (x.is_boolean()) {
      out[k] = x.get<bool>() ? "true" : "false";
    } else if (x.is_number()) {
      out[k] = x.dump();
    } else {
      throw bad_param(key + "." + k, "must be a scalar");
    }
  }
  return out;
}

InstanceAddRequest add_request(const json& p) {
  InstanceAddRequest r;
  r.name = str(p, "name");
  r.disk_template = parse_disk_template(opt_str(p, "disk_template").value_or("plain"));
  r.os = str(p, "os");
  if (p.contains("disks")) {
    const json& d = p.at("disks");
    if (!d.is_array()) throw bad_param("disks", "must be a list");
    for (const json& x : d) r.disks.push_back(size_value(x, "disks"));
  } else {
    r.disks.push_back(size_value(need(p, "size"), "size"));
  }
  std::string be;
  for (const auto& [k, v] : kv_map(p, "be")) be += (be.empty() ? "" : ",") + k + "=" + v;
  r.be = parse_be_params(be);
  r.hv = kv_map(p, "hv");
  r.start = flag(p, "start", true);
  r.name_check = flag(p, "name_check", true);
  r.ip_check = flag(p, "ip_check", true);
  r.node = opt_str(p, "node");
  r.nic_link = opt_str(p, "nic_link");
  r.nic_ip = opt_str(p, "nic_ip");
  return r;
}

InitRequest init_request(const json& p) {
  InitRequest r;
  r.cluster_name = str(p, "cluster_name");
  r.node = str(p, "node");
  if (auto v = opt_str(p, "master_netdev")) r.master_netdev = *v;
  if (auto v = opt_str(p, "default_nic_link")) r.default_nic_link = *v;
  if (auto v = opt_str(p, "vg_name")) r.vg_name = *v;
  if (p.contains("candidate_pool_size")) r.candidate_pool_size = static_cast<int>(integer(p, "candidate_pool_size"));
  if (auto v = opt_str(p, "enabled_hypervisors")) {
    r.enabled_hypervisors.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) r.enabled_hypervisors.push_back(item);
    }
  }
  return r;
}

NicModifyRequest nic_request(const json& p) {
  NicModifyRequest r;
  r.name = str(p, "name");
  r.nic_index = p.contains("nic_index") ? static_cast<int>(integer(p, "nic_index")) : 0;
  r.link = opt_str(p, "link");
  r.hotplug = flag(p, "hotplug", false);
  return r;
}

FailoverRequest failover_request(const json& p) {
  return {str(p, "name"), flag(p, "ignore_consistency", false)};
}

Network network_param(const json& p) {
  try {
    return parse_network(opt_str(p, "network").value_or("public"));
  } catch (const Error& e) {
    throw bad_param("network", e.what());
  }
}

Millis seconds_ms(const json& p) {
  const json& v = need(p, "seconds");
  if (!v.is_number()) throw bad_param("seconds", "must be a number");
  return Millis{std::llround(v.get<double>() * 1000.0)};
}

void require_sim_node(const Cluster& c, const std::string& node) {
  if (!c.world().has_node(node)) throw Error(ErrorCode::kUnknownNode, "Node " + node + " not found");
}

json findings_json(const std::vector<Finding>& findings) {
  json out = json::array();
  for (const Finding& f : findings) out.push_back({{"check", f.check}, {"object", f.object}, {"message", f.message}});
  return out;
}

std::function<std::string(const json&)> target_key(std::string key) {
  return [key](const json& p) { return opt_str(p, key).value_or(""); };
}

std::string cluster_target(const json&) { return std::string(); }

}  // namespace

OpRegistry default_ops() {
  OpRegistry r;

  r.add("cluster-init",
        {[](const Cluster& c, const json& p) { check_cluster_init(c, init_request(p)); },
         [](Cluster& c, JobLog& log, const json& p) {
           cluster_init(c, log, init_request(p));
           return json{{"master", c.config().master_node}};
         },
         target_key("cluster_name")});

  r.add("cluster-modify",
        {[](const Cluster& c, const json& p) { check_modify_hvparams(c, str(p, "hvparams")); },
         [](Cluster& c, JobLog& log, const json& p) {
           cluster_modify_hvparams(c, log, str(p, "hvparams"));
           return json::object();
         },
         cluster_target});

  r.add("cluster-verify-config",
        {[](const Cluster& c, const json&) { (void)c.config(); },
         [](Cluster& c, JobLog& log, const json&) {
           return json{{"findings", findings_json(verify_cluster(c, log))}};
         },
         cluster_target});

  r.add("cluster-verify-group",
        {[](const Cluster& c, const json&) { (void)c.config(); },
         [](Cluster& c, JobLog& log, const json&) {
           return json{{"findings", findings_json(verify_group(c, log))}};
         },
         cluster_target});

  r.add("cluster-copyfile",
        {[](const Cluster& c, const json& p) { check_copyfile(c, str(p, "path")); },
         [](Cluster& c, JobLog& log, const json& p) {
           CopyResult res = cluster_copyfile(c, log, str(p, "path"));
           return json{{"copied", res.copied}, {"failed", res.failed}};
         },
         target_key("path")});

  r.add("cluster-master-failover",
        {[](const Cluster& c, const json& p) { check_master_failover(c, {str(p, "node")}); },
         [](Cluster& c, JobLog& log, const json& p) {
           master_failover(c, log, {str(p, "node")});
           return json{{"master", c.config().master_node}};
         },
         target_key("node")});

  r.add("node-add",
        {[](const Cluster& c, const json& p) { check_node_add(c, {str(p, "name"), opt_str(p, "issued_on")}); },
         [](Cluster& c, JobLog& log, const json& p) {
           node_add(c, log, {str(p, "name"), opt_str(p, "issued_on")});
           return json::object();
         },
         target_key("name")});

  r.add("instance-add",
        {[](const Cluster& c, const json& p) { check_instance_add(c, add_request(p)); },
         [](Cluster& c, JobLog& log, const json& p) {
           InstanceAddResult res = instance_add(c, log, add_request(p));
           return json{{"primary", res.primary},
                       {"secondary", res.secondary ? json(*res.secondary) : json()},
                       {"network_port", res.network_port},
                       {"uuid", res.uuid}};
         },
         target_key("name")});

  r.add("instance-startup",
        {[](const Cluster& c, const json& p) { check_instance_start(c, {str(p, "name"), kv_map(p, "hv")}); },
         [](Cluster& c, JobLog& log, const json& p) {
           instance_start(c, log, {str(p, "name"), kv_map(p, "hv")});
           return json::object();
         },
         target_key("name")});

  r.add("instance-shutdown",
        {[](const Cluster& c, const json& p) { check_instance_shutdown(c, str(p, "name")); },
         [](Cluster& c, JobLog& log, const json& p) {
           instance_shutdown(c, log, str(p, "name"));
           return json::object();
         },
         target_key("name")});

  r.add("instance-modify",
        {[](const Cluster& c, const json& p) { check_modify_nic(c, nic_request(p)); },
         [](Cluster& c, JobLog& log, const json& p) {
           NicModifyResult res = modify_nic(c, log, nic_request(p));
           return json{{"changes", res.changes}, {"hotplugged", res.hotplugged}};
         },
         target_key("name")});

  r.add("instance-migrate",
        {[](const Cluster& c, const json& p) { check_migrate(c, str(p, "name")); },
         [](Cluster& c, JobLog& log, const json& p) {
           migrate(c, log, str(p, "name"));
           const InstanceRecord& inst = c.config().instances.at(str(p, "name"));
           return json{{"primary", inst.primary_node}, {"secondary", inst.secondary_nodes}};
         },
         target_key("name")});

  r.add("instance-failover",
        {[](const Cluster& c, const json& p) { check_failover(c, failover_request(p)); },
         [](Cluster& c, JobLog& log, const json& p) {
           failover(c, log, failover_request(p));
           const InstanceRecord& inst = c.config().instances.at(str(p, "name"));
           return json{{"primary", inst.primary_node}, {"secondary", inst.secondary_nodes}};
         },
         target_key("name")});

  // Lab controls. They act on the simulated machines, never on the config.
  r.add("sim-lab", {[](const Cluster& c, const json&) {
                      if (!c.world().nodes().empty())
                        throw Error(ErrorCode::kDuplicateSimNode, "Lab machines already exist");
                    },
                    [](Cluster& c, JobLog& log, const json&) {
                      setup_lab(c);
                      log.info("Lab ready: " + std::to_string(c.world().nodes().size()) + " machines");
                      return json::object();
                    },
                    cluster_target});

  r.add("sim-power",
        {[](const Cluster& c, const json& p) {
           require_sim_node(c, str(p, "node"));
           (void)parse_power(str(p, "state"));
         },
         [](Cluster& c, JobLog& log, const json& p) {
           const std::string node = str(p, "node");
           const Power power = parse_power(str(p, "state"));
           c.world().set_node_power(node, power);
           log.info("Node " + node + " powered " + std::string(to_string(power)));
           return json{{"node", node}, {"power", to_string(power)}};
         },
         target_key("node")});

  r.add("sim-advance",
        {[](const Cluster&, const json& p) {
           if (seconds_ms(p) < Millis{0}) throw Error(ErrorCode::kNegativeDt, "Cannot move the clock backwards");
         },
         [](Cluster& c, JobLog&, const json& p) {
           c.advance(seconds_ms(p));
           return json{{"now_ms", c.now().count()}};
         },
         cluster_target});

  r.add("sim-probe",
        {[](const Cluster&, const json& p) {
           (void)network_param(p);
           (void)str(p, "instance");
         },
         [](Cluster& c, JobLog&, const json& p) {
           ProbeResult res = c.world().probe(network_param(p), str(p, "instance"));
           return json{{"reply", res.reply()}, {"text", res.text()}, {"address", res.address}};
         },
         target_key("instance")});

  r.add("sim-node",
        {[](const Cluster& c, const json& p) {
           if (c.world().has_node(str(p, "name")))
             throw Error(ErrorCode::kDuplicateSimNode, "Machine " + str(p, "name") + " already exists");
           (void)str(p, "ip");
         },
         [](Cluster& c, JobLog&, const json& p) {
           c.world().add_node(str(p, "name"), str(p, "ip"), size_value(need(p, "mtotal"), "mtotal"),
                              size_value(need(p, "mnode"), "mnode"));
           return json::object();
         },
         target_key("name")});

  r.add("sim-host", {[](const Cluster&, const json& p) {
                       (void)str(p, "fqdn");
                       (void)str(p, "ip");
                     },
                     [](Cluster& c, JobLog&, const json& p) {
                       c.world().set_host(str(p, "fqdn"), str(p, "ip"));
                       return json::object();
                     },
                     target_key("fqdn")});

  r.add("sim-vg",
        {[](const Cluster& c, const json& p) {
           require_sim_node(c, str(p, "node"));
           (void)size_value(need(p, "size"), "size");
         },
         [](Cluster& c, JobLog&, const json& p) {
           c.storage().create_volume_group(str(p, "node"), opt_str(p, "name").value_or(std::string(kDefaultVgName)),
                                           size_value(need(p, "size"), "size"));
           return json::object();
         },
         target_key("node")});

  r.add("sim-file",
        {[](const Cluster& c, const json& p) {
           require_sim_node(c, str(p, "node"));
           (void)str(p, "path");
         },
         [](Cluster& c, JobLog&, const json& p) {
           SimNode& n = c.world().node(str(p, "node"));
           const std::string path = str(p, "path");
           if (flag(p, "remove", false)) {
             n.files.erase(path);
           } else {
             n.files[path] = opt_str(p, "content").value_or("");
           }
           return json::object();
         },
         target_key("path")});

  r.add("sim-lv",
        {[](const Cluster& c, const json& p) {
           require_sim_node(c, str(p, "node"));
           (void)str(p, "name");
           (void)size_value(need(p, "size"), "size");
         },
         [](Cluster& c, JobLog&, const json& p) {
           const LogicalVolume& lv =
               c.storage().create_lv(str(p, "node"), opt_str(p, "vg").value_or(std::string(kDefaultVgName)),
                                     str(p, "name"), size_value(need(p, "size"), "size"), LvRole::kData);
           return json{{"vg", lv.vg}, {"name", lv.lv_name}};
         },
         target_key("name")});

  r.add("sim-monitor",
        {[](const Cluster&, const json& p) {
           (void)network_param(p);
           (void)str(p, "instance");
         },
         [](Cluster& c, JobLog&, const json& p) {
           const Millis every{p.contains("interval_ms") ? integer(p, "interval_ms") : 1000};
           if (every.count() <= 0) throw bad_param("interval_ms", "must be positive");
           return json{{"monitor_id", c.world().add_monitor(network_param(p), str(p, "instance"), every)}};
         },
         target_key("instance")});

  return r;
}

}  // namespace gantry
