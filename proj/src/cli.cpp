#include "gantry/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "gantry/error.hpp"
#include "gantry/membership.hpp"

namespace gantry {

using nlohmann::json;

std::string format_display_size(MiB size) {
  if (size < 1024) return std::to_string(size) + "M";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fG", static_cast<double>(size) / 1024.0);
  return buf;
}

std::string render_table(const std::vector<std::string>& headers, const std::vector<std::vector<std::string>>& rows,
                         const std::set<std::size_t>& right) {
  std::vector<std::size_t> width(headers.size(), 0);
  for (std::size_t c = 0; c < headers.size(); ++c) width[c] = headers[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : std::string();
      const std::string pad(width[c] - cell.size(), ' ');
      if (c > 0) out += ' ';
      out += right.count(c) ? pad + cell : cell + pad;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(headers);
  for (const auto& row : rows) out += line(row);
  return out;
}

std::string render_node_list(const json& nodes) {
  std::vector<std::vector<std::string>> rows;
  for (const json& n : nodes) {
    rows.push_back({n.at("name").get<std::string>() + (n.at("offline").get<bool>() ? "*" : ""),
                    format_display_size(n.at("dtotal").get<MiB>()), format_display_size(n.at("dfree").get<MiB>()),
                    format_display_size(n.at("mtotal").get<MiB>()), format_display_size(n.at("mnode").get<MiB>()),
                    format_display_size(n.at("mfree").get<MiB>()), std::to_string(n.at("pinst").get<int>()),
                    std::to_string(n.at("sinst").get<int>())});
  }
  return render_table({"Node", "DTotal", "DFree", "MTotal", "MNode", "MFree", "Pinst", "Sinst"}, rows,
                      {1, 2, 3, 4, 5, 6, 7});
}

namespace {

std::string text_or_none(const json& v) { return v.is_null() ? "None" : v.get<std::string>(); }

std::string param_line(const json& row) {
  const std::string value = row.at("value").get<std::string>();
  if (row.at("default").get<bool>()) return row.at("key").get<std::string>() + ": default (" + value + ")";
  return row.at("key").get<std::string>() + ": " + value;
}

std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

std::string render_instance_info(const json& i) {
  std::ostringstream o;
  const std::string group = i.at("group").get<std::string>();
  const std::string group_uuid = i.at("group_uuid").get<std::string>();
  o << "- Instance name: " << i.at("name").get<std::string>() << "\n";
  o << "  UUID: " << i.at("uuid").get<std::string>() << "\n";
  o << "  Serial number: " << i.at("serial").get<std::int64_t>() << "\n";
  o << "  Creation time: " << i.at("ctime").get<std::string>() << "\n";
  o << "  Modification time: " << i.at("mtime").get<std::string>() << "\n";
  o << "  State: configured to be " << i.at("admin_state").get<std::string>() << ", actual state is "
    << i.at("actual_state").get<std::string>() << "\n";
  o << "  Nodes:\n";
  o << "    - primary: " << i.at("primary_node").get<std::string>() << "\n";
  o << "      group: " << group << " (UUID " << group_uuid << ")\n";
  o << "    - secondaries:";
  bool first = true;
  for (const json& s : i.at("secondary_nodes")) {
    o << (first ? " " : ", ") << s.get<std::string>() << " (group " << group << ", group UUID " << group_uuid << ")";
    first = false;
  }
  o << "\n";
  o << "  Operating system: " << i.at("os").get<std::string>() << "\n";
  o << "  Operating system parameters:\n";
  o << "  Allocated network port: " << i.at("network_port").get<int>() << "\n";
  o << "  Hypervisor: " << i.at("hypervisor").get<std::string>() << "\n";
  const json& con = i.at("console");
  o << "  console connection: " << con.at("kind").get<std::string>() << " to " << con.at("host").get<std::string>()
    << ":" << con.at("port").get<int>() << " (display " << con.at("display").get<int>() << ")\n";
  o << "  Hypervisor parameters:\n";
  for (const json& row : i.at("hv_params")) o << "    " << param_line(row) << "\n";
  o << "  Back-end parameters:\n";
  for (const json& row : i.at("be_params")) o << "    " << param_line(row) << "\n";
  o << "  NICs:\n";
  for (const json& n : i.at("nics")) {
    o << "    - nic/" << n.at("index").get<int>() << ":\n";
    o << "      MAC: " << n.at("mac").get<std::string>() << "\n";
    o << "      IP: " << text_or_none(n.at("ip")) << "\n";
    o << "      mode: " << capitalized(n.at("mode").get<std::string>()) << "\n";
    o << "      link: " << n.at("link").get<std::string>() << "\n";
    o << "      vlan: " << n.at("vlan").get<std::string>() << "\n";
    o << "      network: " << text_or_none(n.at("network")) << "\n";
    o << "      UUID: " << n.at("uuid").get<std::string>() << "\n";
    o << "      name: " << text_or_none(n.at("name")) << "\n";
  }
  o << "  Disk template: " << i.at("disk_template").get<std::string>() << "\n";
  o << "  Disks:\n";
  for (const json& d : i.at("disks")) {
    o << "    - disk/" << d.at("index").get<int>() << ": " << d.at("template").get<std::string>() << ", size "
      << format_display_size(d.at("size").get<MiB>()) << "\n";
    o << "      access mode: " << d.at("access").get<std::string>() << "\n";
    if (d.contains("node_a")) {
      o << "      nodeA: " << d.at("node_a").at("node").get<std::string>()
        << ", minor=" << d.at("node_a").at("minor").get<int>() << "\n";
      o << "      nodeB: " << d.at("node_b").at("node").get<std::string>()
        << ", minor=" << d.at("node_b").at("minor").get<int>() << "\n";
      o << "      port: " << d.at("port").get<int>() << "\n";
      o << "      auth key: " << d.at("auth_key").get<std::string>() << "\n";
    }
    if (d.contains("logical_id")) o << "      logical_id: " << d.at("logical_id").get<std::string>() << "\n";
    if (d.contains("on_primary")) o << "      on primary: " << d.at("on_primary").get<std::string>() << "\n";
    if (d.contains("on_secondary")) o << "      on secondary: " << d.at("on_secondary").get<std::string>() << "\n";
    o << "      name: " << text_or_none(d.at("name")) << "\n";
    o << "      UUID: " << d.at("uuid").get<std::string>() << "\n";
    if (!d.at("children").empty()) {
      o << "      child devices:\n";
      for (const json& c : d.at("children")) {
        o << "        - child " << c.at("index").get<int>() << ": " << c.at("template").get<std::string>()
          << ", size " << format_display_size(c.value("size", MiB{0})) << "\n";
        o << "          logical_id: " << c.value("logical_id", std::string()) << "\n";
        if (c.contains("on_primary")) o << "          on primary: " << c.at("on_primary").get<std::string>() << "\n";
        if (c.contains("on_secondary"))
          o << "          on secondary: " << c.at("on_secondary").get<std::string>() << "\n";
        o << "          name: " << text_or_none(c.at("name")) << "\n";
      }
    }
  }
  return o.str();
}

namespace {

/// Rendered failure: message for stderr plus exit code.
struct Failure {
  std::string message;
  int exit_code = kExitFailure;
};

std::string fill(std::string_view templ, const std::string& name) {
  std::string out(templ);
  auto pos = out.find("{}");
  if (pos != std::string::npos) out.replace(pos, 2, name);
  return out;
}

std::string trim(std::string s) {
  const auto* ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  s.erase(s.find_last_not_of(ws) + 1);
  return s;
}

/// "\n" escapes in --content arguments.
std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char c = s[++i];
      out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
    } else {
      out += s[i];
    }
  }
  return out;
}

MiB cli_size(const std::string& text, const std::string& flag) {
  try {
    return parse_size(text);
  } catch (const Error& e) {
    throw Failure{"Invalid size '" + text + "' for " + flag + ": " + e.what(), kExitUsage};
  }
}

class Session {
 public:
  Session(ApiClient& client, std::istream& in, std::ostream& out, const CliOptions& opts)
      : client_(client), in_(in), out_(out), opts_(opts) {}

  json get(const std::string& path, const Query& q = {}) { return check(client_.get(path, q)); }
  json post(const std::string& path, const json& body) { return check(client_.post(path, body)); }

  /// Prints the job's lines as they arrive; returns the terminal job.
  json stream(std::int64_t id) {
    std::size_t seen = 0;
    for (;;) {
      json j = get("/2/jobs/" + std::to_string(id) + "/wait",
                   {{"after", std::to_string(seen)}, {"timeout", std::to_string(ApiRouter::kMaxWaitMs)}});
      for (const json& line : j.at("log")) out_ << line.at("rendered").get<std::string>() << "\n";
      out_.flush();
      seen = j.at("log_size").get<std::size_t>();
      const std::string status = j.at("status").get<std::string>();
      if (status == "success" || status == "error") return j;
    }
  }

  /// Submits, streams, and turns a failed job into a Failure.
  json run(const std::string& path, const json& body) {
    json j = stream(post(path, body).at("job_id").get<std::int64_t>());
    if (j.at("status") == "error") throw Failure{"Failure: " + j.at("error").get<std::string>()};
    return j;
  }

  bool confirm(const std::string& text) {
    if (opts_.assume_yes) return true;
    out_ << text << kPromptChoices;
    out_.flush();
    std::string answer;
    std::getline(in_, answer);
    if (opts_.echo_answer) out_ << answer << "\n";
    return trim(answer) == "y";
  }

  std::ostream& out() { return out_; }
  const CliOptions& opts() const { return opts_; }

 private:
  static json check(const ApiResponse& r) {
    if (!r.ok()) {
      std::string msg = r.body.is_object() && r.body.contains("error") ? r.body.at("error").get<std::string>()
                                                                         : "HTTP status " + std::to_string(r.status);
      throw Failure{"Failure: " + msg};
    }
    return r.body;
  }

  ApiClient& client_;
  std::istream& in_;
  std::ostream& out_;
  const CliOptions& opts_;
};

using Action = std::function<int(Session&)>;

/// Wraps a subcommand so the chosen action runs after parsing completes.
CLI::App* command(CLI::App& app, Action& chosen, const std::string& name, const std::string& help,
                  std::function<int(Session&)> action) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->callback([&chosen, action] { chosen = action; });
  return sub;
}

std::string first_machine(Session& s) {
  json nodes = s.get("/2/sim/nodes").at("nodes");
  if (nodes.empty()) throw Failure{"Failure: no machines in the lab"};
  return nodes.begin().key();
}

/// "<idx>:<op>,k=v,..." as used by --net.
struct NetSpec {
  int index = 0;
  std::string op;
  std::map<std::string, std::string> values;
};

NetSpec parse_net(const std::string& text) {
  NetSpec spec;
  auto colon = text.find(':');
  if (colon == std::string::npos) throw Failure{"Invalid --net value '" + text + "'", kExitUsage};
  try {
    std::size_t used = 0;
    spec.index = std::stoi(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("index");
  } catch (const std::exception&) {
    throw Failure{"Invalid NIC index in '" + text + "'", kExitUsage};
  }
  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      spec.op = item;
    } else {
      spec.values[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  return spec;
}

void setup_cluster(CLI::App& app, Action& chosen) {
  auto init = std::make_shared<json>(json::object());
  auto name = std::make_shared<std::string>();
  auto netdev = std::make_shared<std::string>();
  auto hvs = std::make_shared<std::string>();
  auto nic = std::make_shared<std::string>();
  auto vg = std::make_shared<std::string>();
  auto node = std::make_shared<std::string>();
  auto pool = std::make_shared<int>(0);
  CLI::App* c = command(app, chosen, "init", "Create a cluster on this machine", [=](Session& s) {
    json body = {{"cluster_name", *name}};
    body["node"] = !node->empty() ? *node : s.opts().issued_on.value_or(first_machine(s));
    if (!netdev->empty()) body["master_netdev"] = *netdev;
    if (!hvs->empty()) body["enabled_hypervisors"] = *hvs;
    if (!vg->empty()) body["vg_name"] = *vg;
    if (*pool > 0) body["candidate_pool_size"] = *pool;
    if (!nic->empty()) {
      auto eq = nic->find('=');
      if (eq == std::string::npos || nic->substr(0, eq) != "link")
        throw Failure{"Invalid -N value '" + *nic + "', expected link=<bridge>", kExitUsage};
      body["default_nic_link"] = nic->substr(eq + 1);
    }
    s.run("/2/cluster/init", body);
    return kExitOk;
  });
  c->add_option("--master-netdev", *netdev, "Bridge carrying the master IP");
  c->add_option("--enabled-hypervisors", *hvs, "Comma-separated hypervisors");
  c->add_option("-N,--nic-parameters", *nic, "Default NIC parameters (link=<bridge>)");
  c->add_option("--vg-name", *vg, "Volume group for instance disks");
  c->add_option("--candidate-pool-size", *pool, "Number of master candidates");
  c->add_option("--node", *node, "Machine that becomes the master");
  c->add_option("name", *name, "Cluster name")->required();

  auto hv = std::make_shared<std::string>();
  CLI::App* m = command(app, chosen, "modify", "Change cluster parameters", [=](Session& s) {
    s.run("/2/cluster/modify", {{"hvparams", *hv}});
    return kExitOk;
  });
  m->add_option("-H,--hypervisor-parameters", *hv, "hv:key=value,...")->required();

  command(app, chosen, "verify", "Check the cluster", [](Session& s) {
    json ids = s.post("/2/cluster/verify", json::object()).at("job_ids");
    std::string list;
    for (const json& id : ids) list += (list.empty() ? "" : ", ") + std::to_string(id.get<std::int64_t>());
    s.out() << "Submitted jobs " << list << "\n";
    int rc = kExitOk;
    for (const json& id : ids) {
      s.out() << "Waiting for job " << id.get<std::int64_t>() << " ...\n";
      json j = s.stream(id.get<std::int64_t>());
      if (j.at("status") == "error" || !j.at("result").value("findings", json::array()).empty()) rc = kExitFailure;
    }
    return rc;
  });

  auto path = std::make_shared<std::string>();
  CLI::App* cp = command(app, chosen, "copyfile", "Copy a file to all nodes", [=](Session& s) {
    s.run("/2/cluster/copyfile", {{"path", *path}});
    return kExitOk;
  });
  cp->add_option("path", *path, "File on the master")->required();

  auto mf_node = std::make_shared<std::string>();
  CLI::App* mf = command(app, chosen, "master-failover", "Take over the master role", [=](Session& s) {
    std::string target = !mf_node->empty() ? *mf_node : s.opts().issued_on.value_or("");
    if (target.empty()) throw Failure{"master-failover must name the machine it runs on (--node)", kExitUsage};
    s.run("/2/cluster/master-failover", {{"node", target}});
    return kExitOk;
  });
  mf->add_option("--node", *mf_node, "Machine taking over");

  command(app, chosen, "info", "Show cluster parameters", [](Session& s) {
    json info = s.get("/2/info");
    if (!info.at("initialized").get<bool>()) throw Failure{"Failure: Cluster not initialized yet"};
    s.out() << "Cluster name: " << info.at("name").get<std::string>() << "\n"
            << "Master node: " << info.at("master").get<std::string>() << "\n"
            << "Master network device: " << info.at("master_netdev").get<std::string>() << "\n"
            << "Default NIC link: " << info.at("default_nic_link").get<std::string>() << "\n"
            << "Volume group: " << info.at("vg_name").get<std::string>() << "\n"
            << "Configuration serial: " << info.at("config_serial").get<std::int64_t>() << "\n";
    return kExitOk;
  });
}

void setup_node(CLI::App& app, Action& chosen) {
  auto name = std::make_shared<std::string>();
  CLI::App* a = command(app, chosen, "add", "Add a node to the cluster", [=](Session& s) {
    json body = {{"name", *name}};
    if (s.opts().issued_on) body["issued_on"] = *s.opts().issued_on;
    s.out() << node_add_banner(*name) << "\n";
    s.run("/2/nodes", body);
    return kExitOk;
  });
  a->add_option("name", *name, "Node name")->required();

  command(app, chosen, "list", "List nodes", [](Session& s) {
    s.out() << render_node_list(s.get("/2/nodes"));
    return kExitOk;
  });
}

void setup_instance(CLI::App& app, Action& chosen) {
  {
    struct AddArgs {
      std::string name, templ = "plain", os, size, be, hv, node, net;
      std::vector<std::string> disks;
      bool no_start = false, no_name_check = false, no_ip_check = false;
    };
    auto a = std::make_shared<AddArgs>();
    CLI::App* c = command(app, chosen, "add", "Create an instance", [a](Session& s) {
      json body = {{"name", a->name}, {"disk_template", a->templ}, {"os", a->os}};
      json disks = json::array();
      if (!a->size.empty()) disks.push_back(cli_size(a->size, "-s"));
      for (const std::string& d : a->disks) {
        NetSpec spec = parse_net(d);
        auto it = spec.values.find("size");
        if (it == spec.values.end()) throw Failure{"--disk needs size=<size>", kExitUsage};
        disks.push_back(cli_size(it->second, "--disk"));
      }
      if (disks.empty()) throw Failure{"A disk size is required (-s or --disk)", kExitUsage};
      body["disks"] = disks;
      if (!a->be.empty()) {
        try {
          (void)parse_be_params(a->be);
        } catch (const Error& e) {
          throw Failure{std::string("Invalid -B value: ") + e.what(), kExitUsage};
        }
        body["be"] = a->be;
      }
      if (!a->hv.empty()) body["hv"] = a->hv;
      if (!a->node.empty()) body["node"] = a->node.substr(0, a->node.find(':'));
      if (!a->net.empty()) {
        NetSpec spec = parse_net(a->net);
        if (spec.index != 0) throw Failure{"Only NIC 0 can be given at creation", kExitUsage};
        if (spec.values.count("link")) body["nic_link"] = spec.values["link"];
        if (spec.values.count("ip")) body["nic_ip"] = spec.values["ip"];
      }
      body["start"] = !a->no_start;
      body["name_check"] = !a->no_name_check;
      body["ip_check"] = !a->no_ip_check;
      s.run("/2/instances", body);
      return kExitOk;
    });
    c->add_option("-t,--disk-template", a->templ, "plain or drbd");
    c->add_option("-o,--os-type", a->os, "OS definition, provider+variant")->required();
    c->add_option("-s,--os-size", a->size, "Size of disk 0 (e.g. 4G)");
    c->add_option("--disk", a->disks, "<idx>:size=<size>");
    c->add_option("-B,--backend-parameters", a->be, "minmem=256M,maxmem=512M,...");
    c->add_option("-H,--hypervisor-parameters", a->hv, "key=value,...");
    c->add_option("-n,--node", a->node, "Primary node");
    c->add_option("--net", a->net, "0:link=<bridge>,ip=<addr>");
    c->add_flag("--no-start", a->no_start, "Leave the instance stopped");
    c->add_flag("--no-name-check", a->no_name_check, "Skip the DNS check of the name");
    c->add_flag("--no-ip-check", a->no_ip_check, "Skip the IP-in-use check");
    c->add_option("name", a->name, "Instance name")->required();
  }

  for (const std::string verb : {"start", "startup"}) {
    auto name = std::make_shared<std::string>();
    auto hv = std::make_shared<std::string>();
    CLI::App* c = command(app, chosen, verb, "Start an instance", [=](Session& s) {
      json body = json::object();
      if (!hv->empty()) body["hv"] = *hv;
      auto id = s.post("/2/instances/" + *name + "/startup", body).at("job_id").get<std::int64_t>();
      s.out() << "Waiting for job " << id << " for " << *name << " ...\n";
      json j = s.stream(id);
      if (j.at("status") == "error") throw Failure{"Failure: " + j.at("error").get<std::string>()};
      return kExitOk;
    });
    c->add_option("-H,--hypervisor-parameters", *hv, "Temporary hypervisor parameters");
    c->add_option("name", *name, "Instance name")->required();
  }

  for (const std::string verb : {"shutdown", "stop"}) {
    auto name = std::make_shared<std::string>();
    CLI::App* c = command(app, chosen, verb, "Stop an instance", [=](Session& s) {
      auto id = s.post("/2/instances/" + *name + "/shutdown", json::object()).at("job_id").get<std::int64_t>();
      s.out() << "Waiting for job " << id << " for " << *name << " ...\n";
      json j = s.stream(id);
      if (j.at("status") == "error") throw Failure{"Failure: " + j.at("error").get<std::string>()};
      return kExitOk;
    });
    c->add_option("name", *name, "Instance name")->required();
  }

  {
    auto name = std::make_shared<std::string>();
    CLI::App* c = command(app, chosen, "info", "Show instance details", [=](Session& s) {
      s.out() << render_instance_info(s.get("/2/instances/" + *name));
      return kExitOk;
    });
    c->add_option("name", *name, "Instance name")->required();
  }

  {
    auto fields = std::make_shared<std::string>();
    auto no_headers = std::make_shared<bool>(false);
    CLI::App* c = command(app, chosen, "list", "List instances", [=](Session& s) {
      Query q;
      if (!fields->empty()) q["fields"] = *fields;
      json t = s.get("/2/instances", q);
      auto headers = t.at("headers").get<std::vector<std::string>>();
      auto rows = t.at("rows").get<std::vector<std::vector<std::string>>>();
      // Without headers the columns are only as wide as the data.
      if (*no_headers) headers.assign(headers.size(), std::string());
      std::string text = render_table(headers, rows);
      if (*no_headers) text.erase(0, text.find('\n') + 1);
      s.out() << text;
      return kExitOk;
    });
    c->add_option("-o,--output", *fields, "Comma-separated fields");
    c->add_flag("--no-headers", *no_headers, "Omit the header row");
  }

  {
    auto name = std::make_shared<std::string>();
    auto net = std::make_shared<std::string>();
    auto hotplug = std::make_shared<bool>(false);
    CLI::App* c = command(app, chosen, "modify", "Change instance parameters", [=](Session& s) {
      NetSpec spec = parse_net(*net);
      if (spec.op != "modify") throw Failure{"Only --net <idx>:modify,... is supported", kExitUsage};
      json body = {{"nic_index", spec.index}, {"hotplug", *hotplug}};
      for (const auto& [k, v] : spec.values) {
        if (k != "link") throw Failure{"Unsupported NIC parameter '" + k + "'", kExitUsage};
        body["link"] = v;
      }
      if (*hotplug && !s.confirm(std::string(kHotplugPrompt))) return kExitFailure;
      json j = s.run("/2/instances/" + *name + "/modify", body);
      s.out() << "Modified instance " << *name << "\n";
      for (const json& change : j.at("result").at("changes")) s.out() << "- " << change.get<std::string>() << "\n";
      s.out() << kModifyReminder;
      return kExitOk;
    });
    c->add_option("--net", *net, "<idx>:modify,link=<bridge>")->required();
    c->add_flag("--hotplug", *hotplug, "Apply to the running instance");
    c->add_option("name", *name, "Instance name")->required();
  }

  {
    auto name = std::make_shared<std::string>();
    CLI::App* c = command(app, chosen, "migrate", "Live-migrate to the secondary", [=](Session& s) {
      if (!s.confirm(fill(kMigratePrompt, *name))) return kExitFailure;
      s.run("/2/instances/" + *name + "/migrate", json::object());
      return kExitOk;
    });
    c->add_option("name", *name, "Instance name")->required();
  }

  {
    auto name = std::make_shared<std::string>();
    auto ignore = std::make_shared<bool>(false);
    CLI::App* c = command(app, chosen, "failover", "Restart on the secondary", [=](Session& s) {
      if (!s.confirm(fill(kFailoverPrompt, *name))) return kExitFailure;
      s.run("/2/instances/" + *name + "/failover", {{"ignore_consistency", *ignore}});
      return kExitOk;
    });
    c->add_flag("--ignore-consistency", *ignore, "Proceed even if disks are degraded");
    c->add_option("name", *name, "Instance name")->required();
  }
}

void setup_os(CLI::App& app, Action& chosen) {
  command(app, chosen, "list", "List usable OS definitions", [](Session& s) {
    s.out() << "Name\n";
    const json os = s.get("/2/os");
    for (const json& n : os.at("os")) s.out() << n.get<std::string>() << "\n";
    return kExitOk;
  });
}

void setup_sim(CLI::App& app, Action& chosen) {
  command(app, chosen, "lab", "Rack the three-machine lab", [](Session& s) {
    s.run("/2/sim/lab", json::object());
    return kExitOk;
  });

  {
    auto node = std::make_shared<std::string>();
    auto state = std::make_shared<std::string>();
    CLI::App* c = command(app, chosen, "power", "Switch a machine on or off", [=](Session& s) {
      s.run("/2/sim/power", {{"node", *node}, {"state", *state}});
      return kExitOk;
    });
    c->add_option("node", *node)->required();
    c->add_option("state", *state)->required()->check(CLI::IsMember({"on", "off"}));
  }

  {
    auto secs = std::make_shared<double>(0);
    CLI::App* c = command(app, chosen, "advance", "Advance the simulated clock", [=](Session& s) {
      s.run("/2/sim/advance-clock", {{"seconds", *secs}});
      return kExitOk;
    });
    c->add_option("seconds", *secs)->required();
  }

  command(app, chosen, "clock", "Show the simulated time", [](Session& s) {
    s.out() << s.get("/2/info").at("now").get<std::string>() << "\n";
    return kExitOk;
  });

  {
    auto inst = std::make_shared<std::string>();
    auto from = std::make_shared<std::string>("public");
    CLI::App* c = command(app, chosen, "probe", "Ping an instance once", [=](Session& s) {
      json j = s.run("/2/sim/probe", {{"instance", *inst}, {"network", *from}});
      s.out() << j.at("result").at("text").get<std::string>() << "\n";
      return j.at("result").at("reply").get<bool>() ? kExitOk : kExitFailure;
    });
    c->add_option("--from", *from, "Observer network: mgmt or public");
    c->add_option("instance", *inst)->required();
  }

  {
    auto inst = std::make_shared<std::string>();
    auto from = std::make_shared<std::string>("public");
    auto every = std::make_shared<int>(1000);
    CLI::App* c = command(app, chosen, "monitor", "Start a continuous ping", [=](Session& s) {
      json j = s.run("/2/sim/monitor", {{"instance", *inst}, {"network", *from}, {"interval_ms", *every}});
      s.out() << "Monitor " << j.at("result").at("monitor_id").get<int>() << "\n";
      return kExitOk;
    });
    c->add_option("--from", *from, "Observer network: mgmt or public");
    c->add_option("--interval-ms", *every, "Ping interval");
    c->add_option("instance", *inst)->required();
  }

  {
    auto id = std::make_shared<int>(0);
    CLI::App* c = command(app, chosen, "samples", "Print a monitor's replies", [=](Session& s) {
      const json m = s.get("/2/sim/monitors/" + std::to_string(*id));
      for (const json& x : m.at("samples")) s.out() << x.at("text").get<std::string>() << "\n";
      return kExitOk;
    });
    c->add_option("id", *id)->required();
  }

  {
    auto name = std::make_shared<std::string>();
    auto ip = std::make_shared<std::string>();
    auto mtotal = std::make_shared<std::string>();
    auto mnode = std::make_shared<std::string>();
    CLI::App* c = command(app, chosen, "node", "Rack a machine", [=](Session& s) {
      s.run("/2/sim/node", {{"name", *name},
                            {"ip", *ip},
                            {"mtotal", cli_size(*mtotal, "mtotal")},
                            {"mnode", cli_size(*mnode, "mnode")}});
      return kExitOk;
    });
    c->add_option("name", *name)->required();
    c->add_option("ip", *ip)->required();
    c->add_option("mtotal", *mtotal)->required();
    c->add_option("mnode", *mnode)->required();
  }

  {
    auto fqdn = std::make_shared<std::string>();
    auto ip = std::make_shared<std::string>();
    CLI::App* c = command(app, chosen, "host", "Add a hosts entry", [=](Session& s) {
      s.run("/2/sim/host", {{"fqdn", *fqdn}, {"ip", *ip}});
      return kExitOk;
    });
    c->add_option("fqdn", *fqdn)->required();
    c->add_option("ip", *ip)->required();
  }

  {
    auto node = std::make_shared<std::string>();
    auto size = std::make_shared<std::string>();
    auto name = std::make_shared<std::string>("ganeti");
    CLI::App* c = command(app, chosen, "vgcreate", "Create a volume group", [=](Session& s) {
      s.run("/2/sim/vg", {{"node", *node}, {"name", *name}, {"size", cli_size(*size, "size")}});
      return kExitOk;
    });
    c->add_option("--name", *name);
    c->add_option("node", *node)->required();
    c->add_option("size", *size)->required();
  }

  {
    auto node = std::make_shared<std::string>();
    CLI::App* c = command(app, chosen, "vgs", "Show a machine's volume groups", [=](Session& s) {
      s.out() << s.get("/2/sim/nodes/" + *node + "/vgs").at("text").get<std::string>();
      return kExitOk;
    });
    c->add_option("node", *node)->required();
  }

  {
    auto node = std::make_shared<std::string>();
    auto name = std::make_shared<std::string>();
    auto size = std::make_shared<std::string>();
    auto vg = std::make_shared<std::string>("ganeti");
    CLI::App* c = command(app, chosen, "lvcreate", "Create a volume outside the cluster", [=](Session& s) {
      s.run("/2/sim/lv", {{"node", *node}, {"vg", *vg}, {"name", *name}, {"size", cli_size(*size, "size")}});
      return kExitOk;
    });
    c->add_option("--vg", *vg);
    c->add_option("node", *node)->required();
    c->add_option("name", *name)->required();
    c->add_option("size", *size)->required();
  }

  {
    auto node = std::make_shared<std::string>();
    auto path = std::make_shared<std::string>();
    auto content = std::make_shared<std::string>();
    auto remove = std::make_shared<bool>(false);
    CLI::App* c = command(app, chosen, "file", "Write or remove a file on a machine", [=](Session& s) {
      s.run("/2/sim/file", {{"node", *node}, {"path", *path}, {"content", unescape(*content)}, {"remove", *remove}});
      return kExitOk;
    });
    c->add_option("--content", *content, "Text; \\n for newlines");
    c->add_flag("--remove", *remove);
    c->add_option("node", *node)->required();
    c->add_option("path", *path)->required();
  }
}

std::string basename_of(const std::string& path) {
  auto slash = path.rfind('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, ApiClient& client, std::istream& in, std::ostream& out,
            std::ostream& err, const CliOptions& opts) {
  if (argv.empty()) {
    err << "No command given\n";
    return kExitUsage;
  }
  std::vector<std::string> args;
  CliOptions effective = opts;
  for (auto it = argv.begin() + 1; it != argv.end(); ++it) {
    if (*it == "--yes") {
      effective.assume_yes = true;
    } else {
      args.push_back(*it);
    }
  }
  std::string suite = basename_of(argv[0]);
  if (suite == "gnt" || suite == "gantry") {
    if (args.empty()) {
      err << "Usage: gnt <cluster|node|instance|os|sim> <command> ...\n";
      return kExitUsage;
    }
    suite = "gnt-" + args.front();
    args.erase(args.begin());
  }

  CLI::App app{"Cluster administration", suite};
  app.require_subcommand(1);
  Action chosen;
  if (suite == "gnt-cluster") {
    setup_cluster(app, chosen);
  } else if (suite == "gnt-node") {
    setup_node(app, chosen);
  } else if (suite == "gnt-instance") {
    setup_instance(app, chosen);
  } else if (suite == "gnt-os") {
    setup_os(app, chosen);
  } else if (suite == "gnt-sim") {
    setup_sim(app, chosen);
  } else {
    err << "Unknown command suite '" << suite << "'\n";
    return kExitUsage;
  }

  std::vector<const char*> raw{suite.c_str()};
  for (const std::string& a : args) raw.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  Session session(client, in, out, effective);
  try {
    return chosen(session);
  } catch (const Failure& f) {
    out.flush();
    err << f.message << "\n";
    return f.exit_code;
  } catch (const Error& e) {
    out.flush();
    err << e.what() << "\n";
    return e.code() == ErrorCode::kUsageError ? kExitUsage : kExitFailure;
  }
}

}  // namespace gantry
