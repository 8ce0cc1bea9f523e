#include "support.hpp"

#include <fstream>
#include <sstream>

#include "gantry/error.hpp"

namespace gantry::testing {

using nlohmann::json;

std::unique_ptr<Cluster> make_lab_cluster(int members, std::uint64_t seed) {
  auto cluster = std::make_unique<Cluster>(SimClock::kDefaultEpoch, seed);
  setup_lab(*cluster);
  JobRunner jobs(*cluster);
  InitRequest init;
  init.cluster_name = std::string(kLabClusterName);
  init.node = kNode1;
  jobs.run([&](JobLog& log) { cluster_init(*cluster, log, init); });
  jobs.run([&](JobLog& log) {
    cluster_modify_hvparams(*cluster, log, "kvm:kernel_path=,initrd_path=,vnc_bind_address=0.0.0.0");
  });
  const std::vector<std::string> others = {kNode2, kNode3};
  for (int i = 0; i + 1 < members && i < 2; ++i) {
    jobs.run([&](JobLog& log) { node_add(*cluster, log, {others[static_cast<std::size_t>(i)], std::nullopt}); });
  }
  return cluster;
}

void install_cd_and_iso(Cluster& cluster, JobRunner& jobs) {
  SimNode& master = cluster.world().node(cluster.config().master_node);
  write_cd_variant(master);
  master.files[std::string(kLabIso)] = "debian 7.9.0 netinst";
  for (const std::string& path : {os_variant_config_path("image", "cd"), os_variants_list_path("image"),
                                  std::string(kLabIso)}) {
    jobs.run([&](JobLog& log) { cluster_copyfile(cluster, log, path); });
  }
}

InstanceAddRequest drbd_request(const std::string& name, MiB size, MiB maxmem) {
  InstanceAddRequest r;
  r.name = name;
  r.disk_template = DiskTemplate::kDrbd;
  r.os = "image+default";
  r.disks = {size};
  r.be.maxmem = maxmem;
  r.be.minmem = std::min<MiB>(maxmem, 128);
  r.name_check = false;
  r.ip_check = false;
  return r;
}

InstanceAddRequest plain_request(const std::string& name, MiB size, MiB maxmem, std::optional<std::string> node) {
  InstanceAddRequest r = drbd_request(name, size, maxmem);
  r.disk_template = DiskTemplate::kPlain;
  r.node = std::move(node);
  return r;
}

void add_walkthrough_instances(Cluster& cluster, JobRunner& jobs) {
  install_cd_and_iso(cluster, jobs);
  jobs.run([&](JobLog& log) { instance_add(cluster, log, plain_request("firstvm", 1024, 512, kNode3)); });
  jobs.run([&](JobLog& log) { instance_add(cluster, log, drbd_request("second", 1024, 512)); });
  InstanceAddRequest testvm = drbd_request(kTestvm, 4096, 512);
  testvm.os = "image+cd";
  testvm.be.minmem = 256;
  testvm.start = false;
  jobs.run([&](JobLog& log) { instance_add(cluster, log, testvm); });
  StartRequest start{kTestvm, {{"boot_order", "cdrom"}, {"cdrom_image_path", std::string(kLabIso)}}};
  jobs.run([&](JobLog& log) { instance_start(cluster, log, start); });
}

std::vector<std::string> log_texts(const std::vector<LogLine>& lines) {
  std::vector<std::string> out;
  for (const LogLine& l : lines) out.push_back(l.text);
  return out;
}

std::vector<std::string> log_texts(const JobLog& log) { return log_texts(log.lines()); }

Daemon::Daemon(std::unique_ptr<Cluster> cluster)
    : service_(std::make_unique<Service>(std::move(cluster))),
      router_(std::make_unique<ApiRouter>(*service_)),
      client_(std::make_unique<InProcessClient>(*router_)) {}

std::unique_ptr<Daemon> Daemon::lab() {
  auto cluster = std::make_unique<Cluster>();
  setup_lab(*cluster);
  return std::make_unique<Daemon>(std::move(cluster));
}

CliRun Daemon::cli(const std::vector<std::string>& argv, const std::string& answer) {
  std::istringstream in(answer);
  std::ostringstream out;
  std::ostringstream err;
  CliOptions opts;
  opts.echo_answer = true;
  CliRun r;
  r.rc = run_cli(argv, *client_, in, out, err, opts);
  r.out = out.str();
  r.err = err.str();
  return r;
}

Job Daemon::post_and_wait(const std::string& path, const json& body) {
  ApiResponse r = post(path, body);
  if (!r.ok()) throw Error(error_from_name(r.body.at("code").get<std::string>()), r.body.at("error"));
  return service_->wait_terminal(r.body.at("job_id").get<std::int64_t>());
}

void Daemon::advance(double seconds) { post_and_wait("/2/sim/advance-clock", {{"seconds", seconds}}); }

std::int64_t Daemon::now_ms() { return get("/2/info").body.at("now_ms").get<std::int64_t>(); }

ScenarioDriver::ScenarioDriver(Daemon& daemon) : daemon_(daemon), origin_ms_(daemon.now_ms()) {}

CliRun ScenarioDriver::run(const ScenarioStep& step) {
  const std::int64_t due = origin_ms_ + static_cast<std::int64_t>(step.at * 1000.0);
  const std::int64_t now = daemon_.now_ms();
  if (due > now) daemon_.advance(static_cast<double>(due - now) / 1000.0);
  return daemon_.cli(step.argv);
}

std::vector<ScenarioStep> load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_scenario(in);
}

std::string scenario_path(const std::string& name) { return std::string(GANTRY_SCENARIO_DIR) + "/" + name; }

}  // namespace gantry::testing
