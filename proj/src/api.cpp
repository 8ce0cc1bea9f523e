#include "gantry/api.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "gantry/allocator.hpp"
#include "gantry/error.hpp"
#include "gantry/lifecycle.hpp"
#include "gantry/os_catalog.hpp"
#include "gantry/serialize.hpp"

namespace gantry {

using nlohmann::json;

ApiResponse error_response(const Error& e) {
  return {http_status(e.kind()), {{"error", e.what()}, {"code", e.name()}}};
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ApiResponse not_found(const std::string& path) {
  return {404, {{"error", "No such resource: " + path}, {"code", "not-found"}}};
}

ApiResponse method_not_allowed() {
  return {405, {{"error", "Method not allowed"}, {"code", "method-not-allowed"}}};
}

std::int64_t parse_id(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidParams, "Invalid " + what + " '" + text + "'");
}

std::int64_t query_int(const Query& q, const std::string& key, std::int64_t fallback) {
  auto it = q.find(key);
  return it == q.end() ? fallback : parse_id(it->second, key);
}

json info_json(const Cluster& c) {
  const SimClock& clock = c.world().clock();
  json out = {{"initialized", c.initialized()},
              {"now_ms", c.now().count()},
              {"now", clock.log_time(c.now())},
              {"epoch_unix", clock.epoch_unix()}};
  if (!c.initialized()) return out;
  const ClusterConfig& cfg = c.config();
  out["name"] = cfg.cluster_name;
  out["master"] = cfg.master_node;
  out["master_netdev"] = cfg.master_netdev;
  out["enabled_hypervisors"] = cfg.enabled_hypervisors;
  out["hypervisor_params"] = cfg.hypervisor_params;
  out["default_nic_link"] = cfg.default_nic_link;
  out["vg_name"] = cfg.vg_name;
  out["config_serial"] = cfg.config_serial;
  out["candidate_pool_size"] = cfg.candidate_pool_size;
  out["group_uuid"] = cfg.group_uuid;
  return out;
}

json nodes_json(const Cluster& c) {
  const ClusterConfig& cfg = c.config();
  json out = json::array();
  for (const CapacityRow& r : capacity_rows(c)) {
    const NodeRecord& rec = cfg.node(r.node);
    out.push_back({{"name", r.node},
                   {"role", to_string(rec.role)},
                   {"offline", r.offline},
                   {"ip", rec.mgmt_ip},
                   {"uuid", rec.uuid},
                   {"power", to_string(c.world().node(r.node).power)},
                   {"dtotal", r.dtotal},
                   {"dfree", r.dfree},
                   {"mtotal", r.mtotal},
                   {"mnode", r.mnode},
                   {"mfree", r.mfree},
                   {"pinst", r.pinst},
                   {"sinst", r.sinst}});
  }
  return out;
}

json table_json(const Table& t, const std::vector<std::string>& fields) {
  return {{"fields", fields}, {"headers", t.headers}, {"rows", t.rows}};
}

json job_summary(const Job& j) {
  return {{"id", j.id}, {"op", j.op}, {"target", j.target}, {"status", to_string(j.status)}};
}

const std::map<std::string, std::string>& instance_actions() {
  static const std::map<std::string, std::string> m = {
      {"startup", "instance-startup"}, {"shutdown", "instance-shutdown"}, {"migrate", "instance-migrate"},
      {"failover", "instance-failover"}, {"modify", "instance-modify"}};
  return m;
}

const std::map<std::string, std::string>& cluster_actions() {
  static const std::map<std::string, std::string> m = {{"init", "cluster-init"},
                                                       {"modify", "cluster-modify"},
                                                       {"copyfile", "cluster-copyfile"},
                                                       {"master-failover", "cluster-master-failover"}};
  return m;
}

const std::map<std::string, std::string>& sim_actions() {
  static const std::map<std::string, std::string> m = {
      {"power", "sim-power"}, {"advance-clock", "sim-advance"}, {"probe", "sim-probe"},
      {"node", "sim-node"},   {"host", "sim-host"},            {"vg", "sim-vg"},
      {"file", "sim-file"},   {"lv", "sim-lv"},                {"monitor", "sim-monitor"},
      {"lab", "sim-lab"}};
  return m;
}

}  // namespace

ApiResponse ApiRouter::handle(const std::string& method, const std::string& path, const Query& query,
                              const std::string& body) const {
  json parsed = json::object();
  if (!body.empty()) {
    try {
      parsed = json::parse(body);
    } catch (const json::exception&) {
      return error_response(Error(ErrorCode::kInvalidParams, "Request body is not valid JSON"));
    }
  }
  try {
    const auto seg = split(path, '/');
    if (seg.empty() || seg[0] != "2") return not_found(path);
    ApiResponse r = dispatch(method, seg, query, parsed);
    if (r.status == 404 && r.body.is_null()) return not_found(path);
    return r;
  } catch (const Error& e) {
    return error_response(e);
  }
}

ApiResponse ApiRouter::submit(const std::string& op, const json& params) const {
  return {200, {{"job_id", service_.submit(op, params)}}};
}

ApiResponse ApiRouter::dispatch(const std::string& method, const std::vector<std::string>& seg,
                                const Query& query, const json& body) const {
  const bool get = method == "GET";
  const bool post = method == "POST";
  const std::size_t n = seg.size();
  const std::string& top = n > 1 ? seg[1] : std::string();
  const ApiResponse none{404, nullptr};

  if (n == 2 && top == "info") {
    if (!get) return method_not_allowed();
    return {200, service_.read(info_json)};
  }

  if (n == 2 && top == "os") {
    if (!get) return method_not_allowed();
    return {200, {{"os", service_.read([](const Cluster& c) { return os_list(c); })}}};
  }

  if (top == "nodes" && n == 2) {
    if (get) return {200, service_.read(nodes_json)};
    if (post) {
      if (!body.is_object()) throw Error(ErrorCode::kInvalidParams, "Body must be an object");
      return submit("node-add", body);
    }
    return method_not_allowed();
  }

  if (top == "instances" && n == 2) {
    if (get) {
      std::vector<std::string> fields = kDefaultListFields;
      if (auto it = query.find("fields"); it != query.end()) fields = split(it->second, ',');
      return {200, service_.read([&](const Cluster& c) { return table_json(instance_list(c, fields), fields); })};
    }
    if (post) return submit("instance-add", body);
    return method_not_allowed();
  }

  if (top == "instances" && n == 3) {
    if (!get) return method_not_allowed();
    const std::string name = seg[2];
    return {200, service_.read([&](const Cluster& c) { return instance_info(c, name); })};
  }

  if (top == "instances" && n == 4) {
    auto it = instance_actions().find(seg[3]);
    if (it == instance_actions().end()) return none;
    if (!post) return method_not_allowed();
    json params = body.is_object() ? body : json::object();
    params["name"] = seg[2];
    return submit(it->second, params);
  }

  if (top == "cluster" && n == 3) {
    if (seg[2] == "verify") {
      if (!post) return method_not_allowed();
      auto ids = service_.submit_batch({{"cluster-verify-config", json::object()},
                                        {"cluster-verify-group", json::object()}});
      return {200, {{"job_ids", ids}}};
    }
    auto it = cluster_actions().find(seg[2]);
    if (it == cluster_actions().end()) return none;
    if (!post) return method_not_allowed();
    return submit(it->second, body);
  }

  if (top == "jobs" && n == 2) {
    if (!get) return method_not_allowed();
    json out = json::array();
    for (const Job& j : service_.jobs()) out.push_back(job_summary(j));
    return {200, out};
  }

  if (top == "jobs" && (n == 3 || (n == 4 && seg[3] == "wait"))) {
    if (!get) return method_not_allowed();
    const std::int64_t id = parse_id(seg[2], "job id");
    if (n == 3) return {200, job_to_json(service_.job(id), service_.clock())};
    const auto after = static_cast<std::size_t>(std::max<std::int64_t>(0, query_int(query, "after", 0)));
    const auto timeout = std::clamp<std::int64_t>(query_int(query, "timeout", kMaxWaitMs), 0, kMaxWaitMs);
    Job j = service_.wait(id, after, std::chrono::milliseconds(timeout));
    return {200, job_to_json(j, service_.clock(), std::min(after, j.log.size()))};
  }

  if (top == "sim") {
    if (n == 3 && seg[2] == "nodes") {
      if (!get) return method_not_allowed();
      return {200, service_.read([](const Cluster& c) { return world_to_json(c.world()); })};
    }
    if (n == 5 && seg[2] == "nodes" && seg[4] == "vgs") {
      if (!get) return method_not_allowed();
      const std::string node = seg[3];
      return {200, service_.read([&](const Cluster& c) {
                if (!c.world().has_node(node)) throw Error(ErrorCode::kUnknownNode, "Node " + node + " not found");
                return json{{"node", node}, {"text", render_vgs(c.storage(), node)}};
              })};
    }
    if (n == 4 && seg[2] == "monitors") {
      if (!get) return method_not_allowed();
      const int id = static_cast<int>(parse_id(seg[3], "monitor id"));
      return {200, service_.read([&](const Cluster& c) {
                json samples = json::array();
                for (const ProbeSample& s : c.world().monitor_samples(id)) {
                  samples.push_back({{"at_ms", s.at.count()}, {"reply", s.result.reply()}, {"text", s.result.text()}});
                }
                return json{{"id", id}, {"samples", samples}};
              })};
    }
    if (n == 3) {
      auto it = sim_actions().find(seg[2]);
      if (it == sim_actions().end()) return none;
      if (!post) return method_not_allowed();
      return submit(it->second, body);
    }
  }
  return none;
}

ApiResponse InProcessClient::call(const std::string& method, const std::string& path, const Query& query,
                                  const json& body) {
  return router_.handle(method, path, query, body.is_null() ? std::string() : body.dump());
}

Endpoint parse_endpoint(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    throw Error(ErrorCode::kUsageError, "Invalid address '" + text + "', expected host:port");
  Endpoint ep;
  ep.host = text.substr(0, colon);
  try {
    std::size_t used = 0;
    ep.port = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || ep.port < 0 || ep.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw Error(ErrorCode::kUsageError, "Invalid port in address '" + text + "'");
  }
  return ep;
}

Endpoint default_endpoint() {
  if (const char* addr = std::getenv("GANTRY_ADDR"); addr != nullptr && *addr != '\0') return parse_endpoint(addr);
  return {};
}

}  // namespace gantry
