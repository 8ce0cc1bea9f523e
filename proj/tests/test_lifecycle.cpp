#include <gtest/gtest.h>

#include <regex>

#include "gantry/allocator.hpp"
#include "gantry/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace gantry {
namespace {

using testing::kNode1;
using testing::kNode2;
using testing::kNode3;
using testing::kTestvm;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidParams;
}

struct Walkthrough {
  std::unique_ptr<Cluster> cluster = testing::make_lab_cluster();
  testing::JobRunner jobs{*cluster};

  Walkthrough() { testing::add_walkthrough_instances(*cluster, jobs); }

  Cluster& c() { return *cluster; }
  const InstanceRecord& testvm() { return cluster->config().instance(kTestvm); }
  std::uint64_t content_hash() {
    const DiskSpec& d = testvm().disks[0];
    return cluster->storage().find_lv(d.children[0])->content_hash;
  }
};

// Steps of a migration with the progress lines taken out.
std::vector<std::string> migrate_template(const std::string& name, const std::string& source,
                                          const std::string& target) {
  return {"Migrating instance " + name,
          "* checking disk consistency between source and target",
          "* switching node " + target + " to secondary mode",
          "* changing into standalone mode",
          "* changing disks into dual-master mode",
          "* wait until resync is done",
          "* preparing " + target + " to accept the instance",
          "* migrating instance to " + target,
          "* starting memory transfer",
          "* memory transfer complete",
          "* switching node " + source + " to secondary mode",
          "* wait until resync is done",
          "* changing into standalone mode",
          "* changing disks into single-master mode",
          "* wait until resync is done",
          "* done"};
}

TEST(InstanceAdd, FullCommandTrace) {
  auto cluster = testing::make_lab_cluster();
  testing::JobRunner jobs(*cluster);
  testing::install_cd_and_iso(*cluster, jobs);
  InstanceAddRequest req = testing::drbd_request(kTestvm, 4096, 512);
  req.os = "image+cd";
  req.be.minmem = 256;
  req.start = false;
  InstanceAddResult res;
  JobLog log = jobs.run([&](JobLog& l) { res = instance_add(*cluster, l, req); });
  const auto texts = testing::log_texts(log);
  ASSERT_GE(texts.size(), 8u);
  EXPECT_EQ(texts[0], "Selected nodes for instance testvm.project.edu via iallocator hail: " + res.primary + ", " +
                          *res.secondary);
  EXPECT_EQ(log.lines()[0].level, LogLevel::kInfo);
  EXPECT_EQ(texts[1], "* creating instance disks...");
  EXPECT_EQ(texts[2], "adding instance testvm.project.edu to cluster config");
  EXPECT_EQ(texts[3], "Waiting for instance testvm.project.edu to sync disks");
  EXPECT_EQ(texts[texts.size() - 2], "Instance testvm.project.edu's disks are in sync");
  EXPECT_EQ(texts.back(), "* running the instance OS create scripts...");
  const std::regex progress(R"(- device disk/0: \d+\.\d\d% done, (\d+m )?\d+s remaining \(estimated\))");
  std::size_t progress_lines = 0;
  for (std::size_t i = 4; i + 2 < texts.size(); ++i) {
    EXPECT_TRUE(std::regex_match(texts[i], progress)) << texts[i];
    ++progress_lines;
  }
  EXPECT_GE(progress_lines, 7u);
  EXPECT_LE(progress_lines, 8u);
  EXPECT_EQ(texts[texts.size() - 3], "- device disk/0: 100.00% done, 0s remaining (estimated)");
  const InstanceRecord& inst = cluster->config().instance(kTestvm);
  EXPECT_EQ(inst.admin_state, AdminState::kDown);
  EXPECT_FALSE(cluster->instance_running(inst));
  EXPECT_EQ(res.network_port, inst.network_port);
}

TEST(InstanceAdd, SyncProgressEveryMinute) {
  auto cluster = testing::make_lab_cluster();
  testing::JobRunner jobs(*cluster);
  InstanceAddRequest req = testing::drbd_request("vm", 4096, 512);
  JobLog log = jobs.run([&](JobLog& l) { instance_add(*cluster, l, req); });
  std::vector<LogLine> progress;
  for (const LogLine& l : log.lines()) {
    if (l.text.rfind("- device disk/0:", 0) == 0) progress.push_back(l);
  }
  ASSERT_GE(progress.size(), 2u);
  for (std::size_t i = 1; i + 1 < progress.size(); ++i) EXPECT_EQ(progress[i].at - progress[i - 1].at, Millis{60000});
  EXPECT_LE(progress.back().at - progress[progress.size() - 2].at, Millis{60000});
}

TEST(InstanceAdd, PlainOnOverrideNodeHasNoSyncPhase) {
  auto cluster = testing::make_lab_cluster();
  testing::JobRunner jobs(*cluster);
  JobLog log = jobs.run([&](JobLog& l) { instance_add(*cluster, l, testing::plain_request("p", 4096, 256, kNode3)); });
  for (const std::string& t : testing::log_texts(log)) {
    EXPECT_EQ(t.find("sync"), std::string::npos) << t;
    EXPECT_EQ(t.find("iallocator"), std::string::npos) << t;
  }
  EXPECT_EQ(cluster->config().instance("p").primary_node, kNode3);
  EXPECT_TRUE(cluster->instance_running(cluster->config().instance("p")));
}

TEST(InstanceAdd, UnknownOsBeforeCdVariant) {
  auto cluster = testing::make_lab_cluster();
  InstanceAddRequest req = testing::drbd_request("vm", 1024, 256);
  req.os = "image+cd";
  EXPECT_EQ(code_of([&] { check_instance_add(*cluster, req); }), ErrorCode::kUnknownOs);
}

TEST(InstanceAdd, Rejections) {
  auto cluster = testing::make_lab_cluster();
  testing::JobRunner jobs(*cluster);
  jobs.run([&](JobLog& l) { instance_add(*cluster, l, testing::drbd_request("vm", 1024, 256)); });
  EXPECT_EQ(code_of([&] { check_instance_add(*cluster, testing::drbd_request("vm", 1024, 256)); }),
            ErrorCode::kDuplicateInstance);
  InstanceAddRequest named = testing::drbd_request("nowhere.project.edu", 1024, 256);
  named.name_check = true;
  EXPECT_EQ(code_of([&] { check_instance_add(*cluster, named); }), ErrorCode::kNameResolutionFailed);
  InstanceAddRequest bounds = testing::drbd_request("b", 1024, 256);
  bounds.be.minmem = 512;
  EXPECT_EQ(code_of([&] { check_instance_add(*cluster, bounds); }), ErrorCode::kInvalidParams);
  EXPECT_EQ(code_of([&] { check_instance_add(*cluster, testing::drbd_request("big", 1024, 8192)); }),
            ErrorCode::kNoFeasiblePlacement);
  InstanceAddRequest link = testing::drbd_request("l", 1024, 256);
  link.nic_link = "br-nowhere";
  EXPECT_EQ(code_of([&] { check_instance_add(*cluster, link); }), ErrorCode::kUnknownLink);
}

TEST(InstanceAdd, IpCheckRefusesAnAddressInUse) {
  auto cluster = testing::make_lab_cluster();
  cluster->world().set_host("clash.project.edu", "192.168.20.223");
  InstanceAddRequest req = testing::drbd_request("clash.project.edu", 1024, 256);
  req.name_check = true;
  req.ip_check = true;
  EXPECT_EQ(code_of([&] { check_instance_add(*cluster, req); }), ErrorCode::kIpInUse);
  req.ip_check = false;
  EXPECT_NO_THROW(check_instance_add(*cluster, req));
}

TEST(Walkthrough, PortsMinorsAndMeta) {
  Walkthrough w;
  const InstanceRecord& t = w.testvm();
  EXPECT_EQ(w.c().config().instance("firstvm").network_port, 11000);
  EXPECT_EQ(w.c().config().instance("second").network_port, 11001);
  EXPECT_EQ(w.c().config().instance("second").disks[0].port, 11002);
  EXPECT_EQ(t.network_port, 11003);
  const DiskSpec& d = t.disks[0];
  EXPECT_EQ(d.port, 11004);
  EXPECT_EQ(d.minor_a, 1);
  EXPECT_EQ(d.minor_b, 1);
  EXPECT_EQ(w.c().storage().find_lv({d.node_a, "ganeti", d.uuid + ".disk_meta"})->size, 320);
  EXPECT_EQ(t.primary_node, kNode2);
  EXPECT_EQ(t.secondary(), kNode1);
}

TEST(Start, CdromBootAndInfo) {
  Walkthrough w;
  const SimVm* vm = w.c().world().find_running_vm(kTestvm);
  ASSERT_NE(vm, nullptr);
  EXPECT_EQ(vm->boot_order, BootOrder::kCdrom);
  EXPECT_EQ(vm->cdrom_path, std::string(kLabIso));
  EXPECT_EQ(vm->display(), 5103);
  nlohmann::json info = instance_info(w.c(), kTestvm);
  EXPECT_EQ(info["admin_state"], "up");
  EXPECT_EQ(info["actual_state"], "up");
  EXPECT_EQ(info["console"]["display"], 5103);
  // The boot overrides were for that boot only.
  for (const auto& row : info["hv_params"]) {
    if (row["key"] == "boot_order") {
      EXPECT_EQ(row["default"], true);
      EXPECT_EQ(row["value"], "disk");
    }
    if (row["key"] == "acpi") {
      EXPECT_EQ(row["value"], "True");
    }
  }
  EXPECT_EQ(info["disks"][0]["on_primary"], "/dev/drbd1 (147:1) in sync, status ok");
}

TEST(Start, AlreadyRunningWarns) {
  Walkthrough w;
  JobLog log = w.jobs.run([&](JobLog& l) { instance_start(w.c(), l, {kTestvm, {}}); });
  ASSERT_EQ(log.lines().size(), 1u);
  EXPECT_EQ(log.lines()[0].level, LogLevel::kWarning);
}

TEST(Start, MissingIsoOnPrimary) {
  auto cluster = testing::make_lab_cluster();
  testing::JobRunner jobs(*cluster);
  InstanceAddRequest req = testing::drbd_request("vm", 1024, 256);
  req.start = false;
  jobs.run([&](JobLog& l) { instance_add(*cluster, l, req); });
  cluster->world().node(kNode1).files[std::string(kLabIso)] = "iso";  // master only, never copied
  StartRequest start{"vm", {{"boot_order", "cdrom"}, {"cdrom_image_path", std::string(kLabIso)}}};
  const std::string primary = cluster->config().instance("vm").primary_node;
  if (primary != kNode1) {
    EXPECT_EQ(code_of([&] { check_instance_start(*cluster, start); }), ErrorCode::kMissingIsoOnNode);
  }
  cluster->world().node(kNode1).files.erase(std::string(kLabIso));
  EXPECT_EQ(code_of([&] { check_instance_start(*cluster, start); }), ErrorCode::kMissingIsoOnNode);
}

TEST(Start, PrimaryOffline) {
  Walkthrough w;
  w.jobs.run([&](JobLog& l) { instance_shutdown(w.c(), l, kTestvm); });
  w.c().world().set_node_power(kNode2, Power::kOff);
  EXPECT_EQ(code_of([&] { check_instance_start(w.c(), {kTestvm, {}}); }), ErrorCode::kPrimaryOffline);
}

TEST(Shutdown, FreesPrimaryMemory) {
  Walkthrough w;
  const MiB before = node_capacity_row(w.c(), kNode2).mfree;
  JobLog log = w.jobs.run([&](JobLog& l) { instance_shutdown(w.c(), l, kTestvm); });
  EXPECT_TRUE(log.lines().empty());
  EXPECT_EQ(node_capacity_row(w.c(), kNode2).mfree, before + 512);
  EXPECT_EQ(instance_status(w.c(), w.testvm()), "ADMIN_down");
  JobLog again = w.jobs.run([&](JobLog& l) { instance_shutdown(w.c(), l, kTestvm); });
  ASSERT_EQ(again.lines().size(), 1u);
  EXPECT_EQ(again.lines()[0].level, LogLevel::kWarning);
}

TEST(Shutdown, OfflinePrimaryForcedDownWithWarning) {
  Walkthrough w;
  w.c().world().set_node_power(kNode2, Power::kOff);
  EXPECT_EQ(instance_status(w.c(), w.testvm()), "ERROR_down");
  JobLog log = w.jobs.run([&](JobLog& l) { instance_shutdown(w.c(), l, kTestvm); });
  // The shutdown warning, then the config push missing the dead node.
  ASSERT_EQ(log.lines().size(), 2u);
  EXPECT_EQ(log.lines()[0].level, LogLevel::kWarning);
  EXPECT_NE(log.lines()[0].text.find("No route to host"), std::string::npos);
  EXPECT_EQ(log.lines()[1].text.rfind("Copy of file /var/lib/ganeti/config.data to node " + kNode2, 0), 0u);
  EXPECT_EQ(w.testvm().admin_state, AdminState::kDown);
}

TEST(List, ColumnsAndErrors) {
  Walkthrough w;
  Table t = instance_list(w.c());
  EXPECT_EQ(t.headers, (std::vector<std::string>{"Instance", "Primary_node", "Secondary_Nodes", "Status"}));
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0], (std::vector<std::string>{"firstvm", kNode3, "", "running"}));
  EXPECT_EQ(code_of([&] { instance_list(w.c(), {"name", "foo"}); }), ErrorCode::kUnknownField);
  try {
    instance_list(w.c(), {"foo"});
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("foo"), std::string::npos);
  }
}

TEST(List, EmptyClusterIsHeaderOnly) {
  auto cluster = testing::make_lab_cluster();
  Table t = instance_list(*cluster);
  EXPECT_EQ(t.headers.size(), 4u);
  EXPECT_TRUE(t.rows.empty());
}

TEST(ModifyNic, HotplugSwapsNetworks) {
  Walkthrough w;
  EXPECT_FALSE(w.c().world().probe(Network::kMgmt, kTestvm).reply());
  NicModifyResult r;
  JobLog log = w.jobs.run([&](JobLog& l) { r = modify_nic(w.c(), l, {kTestvm, 0, "br-man", true}); });
  EXPECT_EQ(testing::log_texts(log), (std::vector<std::string>{"Trying to hotplug device...", "Hotplug done."}));
  EXPECT_EQ(r.changes, (std::vector<std::string>{"nic.link/0 -> br-man", "nic.mode/0 -> bridged", "nic.vlan/0 ->",
                                                 "nic/0 -> hotplug:done"}));
  EXPECT_TRUE(w.c().world().probe(Network::kMgmt, kTestvm).reply());
  EXPECT_FALSE(w.c().world().probe(Network::kPublic, kTestvm).reply());
  EXPECT_EQ(w.testvm().nics[0].link, "br-man");
}

TEST(ModifyNic, SameLinkKeepsReachability) {
  Walkthrough w;
  NicModifyResult r;
  w.jobs.run([&](JobLog& l) { r = modify_nic(w.c(), l, {kTestvm, 0, "br-public", true}); });
  EXPECT_EQ(r.changes[0], "nic.link/0 -> br-public");
  EXPECT_TRUE(w.c().world().probe(Network::kPublic, kTestvm).reply());
}

TEST(ModifyNic, OneLostProbeDuringHotplug) {
  Walkthrough w;
  const int mon = w.c().world().add_monitor(Network::kMgmt, kTestvm, Millis{1000});
  const Millis start = w.c().now();
  w.jobs.run([&](JobLog& l) { modify_nic(w.c(), l, {kTestvm, 0, "br-man", true}); });
  const Millis end = w.c().now();
  w.c().advance(Millis{5000});
  int lost = 0;
  bool answered_after = false;
  for (const ProbeSample& s : w.c().world().monitor_samples(mon)) {
    if (s.at >= start && s.at <= end) lost += s.result.outcome == ProbeOutcome::kTransientLoss;
    if (s.at > end) answered_after = s.result.reply();
  }
  EXPECT_EQ(lost, 1);
  EXPECT_TRUE(answered_after);
}

TEST(ModifyNic, Rejections) {
  Walkthrough w;
  EXPECT_EQ(code_of([&] { check_modify_nic(w.c(), {kTestvm, 5, "br-man", true}); }), ErrorCode::kBadNicIndex);
  EXPECT_EQ(code_of([&] { check_modify_nic(w.c(), {kTestvm, 0, "br-void", true}); }), ErrorCode::kUnknownLink);
  EXPECT_EQ(code_of([&] { check_modify_nic(w.c(), {"ghost", 0, "br-man", true}); }), ErrorCode::kUnknownInstance);
}

TEST(Migrate, GoldenTraceAndSafety) {
  Walkthrough w;
  w.jobs.run([&](JobLog& l) { modify_nic(w.c(), l, {kTestvm, 0, "br-man", true}); });
  const std::uint64_t hash = w.content_hash();
  const std::string disk = w.testvm().disks[0].uuid;
  const int mon = w.c().world().add_monitor(Network::kMgmt, kTestvm, Millis{1000});
  const Millis start = w.c().now();
  JobLog log = w.jobs.run([&](JobLog& l) { migrate(w.c(), l, kTestvm); });
  const std::int64_t job = w.jobs.last_id();

  std::vector<std::string> steps;
  std::vector<double> percents;
  for (const std::string& t : testing::log_texts(log)) {
    double pct = 0;
    if (std::sscanf(t.c_str(), "* memory transfer progress: %lf %%", &pct) == 1) {
      percents.push_back(pct);
    } else {
      steps.push_back(t);
    }
  }
  EXPECT_EQ(steps, migrate_template(kTestvm, kNode2, kNode1));
  const auto marks = oracle::progress_marks(11.0, 10.0, 512.0);
  ASSERT_EQ(percents.size(), marks.size());
  for (std::size_t i = 0; i < marks.size(); ++i) {
    EXPECT_NEAR(percents[i], marks[i], 2.0);
    if (i > 0) {
      EXPECT_GT(percents[i], percents[i - 1]);
    }
  }

  EXPECT_EQ(w.testvm().primary_node, kNode1);
  EXPECT_EQ(w.testvm().secondary(), kNode2);
  EXPECT_EQ(w.testvm().disks[0].uuid, disk);
  EXPECT_EQ(w.content_hash(), hash);
  EXPECT_EQ(w.c().world().vm_host(kTestvm), kNode1);
  EXPECT_EQ(instance_status(w.c(), w.testvm()), "running");

  int timeouts = 0;
  for (const ProbeSample& s : w.c().world().monitor_samples(mon)) {
    if (s.at >= start) timeouts += !s.result.reply();
  }
  EXPECT_EQ(timeouts, 1);
  // Some side stays primary throughout.
  for (const TransitionRecord& t : w.c().storage().transitions()) {
    if (t.job == job && t.disk_uuid == disk) {
      EXPECT_GE(t.primaries_after, 1);
    }
  }
}

TEST(Migrate, PlainIsRefused) {
  Walkthrough w;
  EXPECT_EQ(code_of([&] { check_migrate(w.c(), "firstvm"); }), ErrorCode::kNotDrbd);
}

TEST(Migrate, SecondaryOffLeavesEverythingAlone) {
  Walkthrough w;
  w.c().world().set_node_power(kNode1, Power::kOff);
  const std::string before = w.testvm().primary_node;
  const auto serial = w.c().config().config_serial;
  EXPECT_EQ(code_of([&] { w.jobs.run([&](JobLog& l) { migrate(w.c(), l, kTestvm); }); }), ErrorCode::kNodeOffline);
  EXPECT_EQ(w.testvm().primary_node, before);
  EXPECT_EQ(w.c().config().config_serial, serial);
}

TEST(Migrate, StoppedInstanceIsRefused) {
  Walkthrough w;
  w.jobs.run([&](JobLog& l) { instance_shutdown(w.c(), l, kTestvm); });
  EXPECT_EQ(code_of([&] { check_migrate(w.c(), kTestvm); }), ErrorCode::kInstanceNotRunning);
}

TEST(Failover, DeadPrimaryWithIgnoreConsistency) {
  Walkthrough w;
  w.c().world().set_node_power(kNode2, Power::kOff);
  JobLog log = w.jobs.run([&](JobLog& l) { failover(w.c(), l, {kTestvm, true}); });
  std::vector<std::string> warnings;
  for (const LogLine& l : log.lines()) {
    if (l.level == LogLevel::kWarning) warnings.push_back(l.text);
  }
  ASSERT_GE(warnings.size(), 3u);
  EXPECT_EQ(warnings[0].rfind("Could not shutdown instance testvm.project.edu on node node2.project.edu, proceeding "
                              "anyway",
                              0),
            0u);
  EXPECT_EQ(warnings[1], "Could not shutdown block device disk/0 on node node2.project.edu: Error 7: Failed connect to "
                         "192.168.20.223:1811; No route to host");
  EXPECT_EQ(warnings[2].rfind("Copy of file /var/lib/ganeti/config.data to node node2.project.edu failed", 0), 0u);
  EXPECT_EQ(w.testvm().primary_node, kNode1);
  EXPECT_EQ(w.testvm().secondary(), kNode2);
  EXPECT_EQ(instance_status(w.c(), w.testvm()), "running");
}

TEST(Failover, CleanWhenBothOnline) {
  Walkthrough w;
  JobLog log = w.jobs.run([&](JobLog& l) { failover(w.c(), l, {kTestvm, false}); });
  for (const LogLine& l : log.lines()) EXPECT_NE(l.level, LogLevel::kWarning) << l.text;
  EXPECT_EQ(w.c().world().vm_host(kTestvm), kNode1);
  EXPECT_EQ(w.testvm().secondary(), kNode2);
}

TEST(Failover, DeadPrimaryNeedsTheFlag) {
  Walkthrough w;
  w.c().world().set_node_power(kNode2, Power::kOff);
  EXPECT_EQ(code_of([&] { check_failover(w.c(), {kTestvm, false}); }), ErrorCode::kConsistencyRequired);
}

TEST(Failover, SecondaryOffline) {
  Walkthrough w;
  w.c().world().set_node_power(kNode1, Power::kOff);
  EXPECT_EQ(code_of([&] { check_failover(w.c(), {kTestvm, true}); }), ErrorCode::kSecondaryOffline);
}

// After any completed job, admin down with the VM up never persists, and a
// running status means a VM on the primary.
TEST(Coherence, AdminAndActualStateAgreeAfterJobs) {
  Walkthrough w;
  auto check = [&] {
    for (const auto& [name, inst] : w.c().config().instances) {
      const bool running = w.c().world().vm_host(name) == inst.primary_node;
      EXPECT_EQ(w.c().instance_running(inst), running);
      EXPECT_FALSE(inst.admin_state == AdminState::kDown && running) << name;
    }
  };
  check();
  w.jobs.run([&](JobLog& l) { migrate(w.c(), l, kTestvm); });
  check();
  w.jobs.run([&](JobLog& l) { instance_shutdown(w.c(), l, "second"); });
  check();
  w.jobs.run([&](JobLog& l) { failover(w.c(), l, {kTestvm, false}); });
  check();
}

}  // namespace
}  // namespace gantry
