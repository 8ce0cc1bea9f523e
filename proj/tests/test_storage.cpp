#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <regex>

#include "gantry/allocator.hpp"
#include "gantry/error.hpp"
#include "support.hpp"

namespace gantry {
namespace {

using testing::kNode1;
using testing::kNode2;
using testing::kNode3;

// Independent resync arithmetic: percent of `size` after `t` seconds.
double resync_oracle(double rate, double t, double size) { return std::min(100.0, 100.0 * rate * t / size); }

struct Fixture {
  ClusterConfig config;
  StorageState storage;

  Fixture() {
    config.vg_name = "ganeti";
    config.rng_seed = 5;
    for (const std::string& n : {kNode1, kNode2, kNode3}) {
      config.nodes[n] = {n, "u-" + n, "10.0.0.1", NodeRole::kMasterCandidate};
      storage.create_volume_group(n, "ganeti", kLabVgSize);
    }
  }

  DiskSpec drbd(MiB size, const std::string& a = kNode2, const std::string& b = kNode1) {
    return provision_instance_disks(config, storage, DiskTemplate::kDrbd, size, a, b);
  }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidParams;
}

TEST(VolumeGroup, LabSizeRendersLikeVgs) {
  StorageState s;
  s.create_volume_group(kNode1, "ganeti", kLabVgSize);
  const std::string text = render_vgs(s, kNode1);
  EXPECT_NE(text.find("137.87g 137.87g"), std::string::npos) << text;
  EXPECT_EQ(s.vg(kNode1, "ganeti").free, kLabVgSize);
}

TEST(VolumeGroup, DuplicateNameRejected) {
  StorageState s;
  s.create_volume_group(kNode1, "ganeti", 100);
  EXPECT_EQ(code_of([&] { s.create_volume_group(kNode1, "ganeti", 100); }), ErrorCode::kDuplicateVg);
  // Same name on another node is a different group.
  EXPECT_NO_THROW(s.create_volume_group(kNode2, "ganeti", 100));
}

TEST(MetaSize, FormulaAndFourGibPoint) {
  EXPECT_EQ(drbd_meta_size(4096), 320);
  EXPECT_EQ(drbd_meta_size(8192), 512);
  EXPECT_EQ(drbd_meta_size(1024), 176);
  EXPECT_EQ(drbd_meta_size(1025), 224);
  for (MiB d = 1; d <= 20000; d += 97) {
    const MiB gib = static_cast<MiB>(std::ceil(static_cast<double>(d) / 1024.0));
    EXPECT_EQ(drbd_meta_size(d), 128 + 48 * gib) << d;
  }
}

TEST(Provision, DrbdCreatesDataAndMetaOnBothNodes) {
  Fixture f;
  DiskSpec d = f.drbd(4096);
  EXPECT_EQ(d.children.size(), 4u);
  for (const std::string& n : {kNode1, kNode2}) {
    const LogicalVolume* data = f.storage.find_lv({n, "ganeti", d.uuid + ".disk_data"});
    const LogicalVolume* meta = f.storage.find_lv({n, "ganeti", d.uuid + ".disk_meta"});
    ASSERT_NE(data, nullptr);
    ASSERT_NE(meta, nullptr);
    EXPECT_EQ(data->size, 4096);
    EXPECT_EQ(meta->size, 320);
    EXPECT_EQ(f.storage.vg(n, "ganeti").free, kLabVgSize - 4416);
  }
  const DrbdPair& p = f.storage.pair(d.uuid);
  EXPECT_TRUE(p.all_connected());
  EXPECT_FALSE(p.up_to_date());
  EXPECT_DOUBLE_EQ(p.sync_percent(), 0.0);
  EXPECT_EQ(d.port, 11000);
  EXPECT_EQ(std::make_pair(d.minor_a, d.minor_b), std::make_pair(0, 0));
  EXPECT_TRUE(std::regex_match(d.auth_key, std::regex("[0-9a-f]{40}")));
}

TEST(Provision, PlainHasNoMetaAndNoPair) {
  Fixture f;
  DiskSpec d = provision_instance_disks(f.config, f.storage, DiskTemplate::kPlain, 4096, kNode3, std::nullopt);
  EXPECT_EQ(d.children.size(), 1u);
  EXPECT_FALSE(f.storage.has_pair(d.uuid));
  EXPECT_EQ(f.storage.vg(kNode3, "ganeti").free, kLabVgSize - 4096);
  EXPECT_EQ(f.config.port_counter, kFirstNetworkPort);
}

TEST(Provision, InsufficientSpaceNamesNodeAndAllocatesNothing) {
  Fixture f;
  f.storage.create_lv(kNode1, "ganeti", "filler", kLabVgSize - 1000, LvRole::kData);
  const auto serial = f.config.config_serial;
  try {
    f.drbd(1024);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientSpace);
    EXPECT_NE(std::string(e.what()).find(kNode1), std::string::npos);
  }
  EXPECT_EQ(f.config.config_serial, serial);
  EXPECT_EQ(f.config.port_counter, kFirstNetworkPort);
  EXPECT_EQ(f.storage.vg(kNode2, "ganeti").free, kLabVgSize);
}

TEST(Provision, UnknownNode) {
  Fixture f;
  EXPECT_EQ(code_of([&] { f.drbd(1024, "ghost", kNode1); }), ErrorCode::kUnknownNode);
}

TEST(Transitions, MigrationSequenceIsLegal) {
  Fixture f;
  DiskSpec d = f.drbd(1024);
  f.storage.resync_tick(d.uuid, Millis{1000000});
  f.storage.set_mode(d.uuid, DrbdTransition::single_primary(kNode2));
  DrbdPair& p = f.storage.pair(d.uuid);
  EXPECT_EQ(p.describe(), "connected, primary/secondary");

  f.storage.set_mode(d.uuid, DrbdTransition::secondary(kNode1));
  f.storage.set_mode(d.uuid, DrbdTransition::standalone());
  EXPECT_EQ(p.describe(), "standalone, primary/secondary");
  p.dual_primary_allowed = true;
  f.storage.set_mode(d.uuid, DrbdTransition::connected());
  f.storage.set_mode(d.uuid, DrbdTransition::dual_primary());
  EXPECT_EQ(p.primaries(), 2);
  f.storage.set_mode(d.uuid, DrbdTransition::secondary(kNode2));
  EXPECT_EQ(p.primary_side()->node, kNode1);
  p.dual_primary_allowed = false;
  f.storage.set_mode(d.uuid, DrbdTransition::standalone());
  f.storage.set_mode(d.uuid, DrbdTransition::connected());
  EXPECT_EQ(p.describe(), "connected, secondary/primary");
}

TEST(Transitions, DualToSinglePrimaryDemotesTheOther) {
  Fixture f;
  DiskSpec d = f.drbd(1024);
  f.storage.set_mode(d.uuid, DrbdTransition::single_primary(kNode2));
  f.storage.pair(d.uuid).dual_primary_allowed = true;
  f.storage.set_mode(d.uuid, DrbdTransition::dual_primary());
  f.storage.set_mode(d.uuid, DrbdTransition::single_primary(kNode1));
  EXPECT_EQ(f.storage.pair(d.uuid).primaries(), 1);
  EXPECT_EQ(f.storage.pair(d.uuid).primary_side()->node, kNode1);
}

TEST(Transitions, IllegalOnesNameBothStates) {
  Fixture f;
  DiskSpec d = f.drbd(1024);
  f.storage.set_mode(d.uuid, DrbdTransition::single_primary(kNode2));
  f.storage.set_mode(d.uuid, DrbdTransition::standalone());
  f.storage.pair(d.uuid).dual_primary_allowed = true;
  try {
    f.storage.set_mode(d.uuid, DrbdTransition::dual_primary());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIllegalTransition);
    const std::string what = e.what();
    EXPECT_NE(what.find("dual_primary"), std::string::npos);
    EXPECT_NE(what.find("standalone"), std::string::npos);
  }
  // Already standalone.
  EXPECT_EQ(code_of([&] { f.storage.set_mode(d.uuid, DrbdTransition::standalone()); }),
            ErrorCode::kIllegalTransition);
  f.storage.set_mode(d.uuid, DrbdTransition::connected());
  // Already connected.
  EXPECT_EQ(code_of([&] { f.storage.set_mode(d.uuid, DrbdTransition::connected()); }),
            ErrorCode::kIllegalTransition);
}

TEST(Transitions, DualPrimaryNeedsPermission) {
  Fixture f;
  DiskSpec d = f.drbd(1024);
  f.storage.set_mode(d.uuid, DrbdTransition::single_primary(kNode2));
  EXPECT_EQ(code_of([&] { f.storage.set_mode(d.uuid, DrbdTransition::dual_primary()); }),
            ErrorCode::kIllegalTransition);
}

TEST(Resync, OneMinuteOfFourGigabytes) {
  Fixture f;
  DiskSpec d = f.drbd(4096);
  ResyncReport r = f.storage.resync_tick(d.uuid, Millis{60000});
  EXPECT_NEAR(r.percent, resync_oracle(11.5, 60, 4096), 1e-9);
  EXPECT_NEAR(r.percent, 16.85, 0.01);
  EXPECT_TRUE(std::regex_match(r.text(), std::regex(R"(\d{1,3}\.\d{2}% done, (\d+m )?\d+s remaining \(estimated\))")))
      << r.text();
  EXPECT_EQ(r.text(), "16.85% done, 4m 56s remaining (estimated)");
}

TEST(Resync, MonotoneAndEndsAtExactlyOneHundred) {
  Fixture f;
  DiskSpec d = f.drbd(4096);
  double last = 0;
  std::mt19937 rng(11);
  for (;;) {
    ResyncReport r = f.storage.resync_tick(d.uuid, Millis{static_cast<int>(rng() % 40000) + 1});
    EXPECT_GE(r.percent, last);
    last = r.percent;
    if (f.storage.pair(d.uuid).up_to_date()) break;
  }
  EXPECT_EQ(last, 100.0);
  EXPECT_EQ(f.storage.resync_report(d.uuid).text(), "100.00% done, 0s remaining (estimated)");
  EXPECT_EQ(code_of([&] { f.storage.resync_tick(d.uuid, Millis{1}); }), ErrorCode::kNotSyncing);
}

TEST(Resync, FullSyncDurationMatchesRateOracle) {
  Fixture f;
  DiskSpec d = f.drbd(4096);
  std::int64_t seconds = 0;
  while (!f.storage.pair(d.uuid).up_to_date()) {
    f.storage.resync_tick(d.uuid, Millis{1000});
    ++seconds;
  }
  EXPECT_EQ(seconds, static_cast<std::int64_t>(std::ceil(4096 / 11.5)));
}

TEST(Resync, SplitAdvancesAddUp) {
  Fixture a;
  Fixture b;
  DiskSpec da = a.drbd(4096);
  DiskSpec db = b.drbd(4096);
  a.storage.advance(Millis{60000});
  for (int i = 0; i < 60; ++i) b.storage.advance(Millis{1000});
  EXPECT_EQ(a.storage.pair(da.uuid).synced_units, b.storage.pair(db.uuid).synced_units);
}

TEST(Resync, FormatRemaining) {
  EXPECT_EQ(format_remaining(Millis{256000}), "4m 16s");
  EXPECT_EQ(format_remaining(Millis{56000}), "56s");
  EXPECT_EQ(format_remaining(Millis{0}), "0s");
}

TEST(Deactivate, DeadNodeWarnsOncePerDisk) {
  auto cluster = testing::make_lab_cluster();
  testing::JobRunner jobs(*cluster);
  InstanceAddRequest req = testing::drbd_request("twodisk", 512, 256);
  req.disks = {512, 256};
  jobs.run([&](JobLog& log) { instance_add(*cluster, log, req); });
  const InstanceRecord& inst = cluster->config().instance("twodisk");
  const std::string node = *inst.secondary();
  cluster->world().set_node_power(node, Power::kOff);
  JobLog log = jobs.run([&](JobLog& l) {
    deactivate_disks(cluster->config(), cluster->storage(), cluster->world(), "twodisk", node, l);
  });
  ASSERT_EQ(log.lines().size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(log.lines()[i].level, LogLevel::kWarning);
    EXPECT_EQ(log.lines()[i].text.rfind("Could not shutdown block device disk/" + std::to_string(i) + " on node " +
                                            node,
                                        0),
              0u);
  }
}

TEST(Deactivate, LiveNodeIsQuiet) {
  auto cluster = testing::make_lab_cluster();
  testing::JobRunner jobs(*cluster);
  jobs.run([&](JobLog& log) { instance_add(*cluster, log, testing::drbd_request("vm", 512, 256)); });
  const InstanceRecord& inst = cluster->config().instance("vm");
  JobLog log = jobs.run([&](JobLog& l) {
    deactivate_disks(cluster->config(), cluster->storage(), cluster->world(), "vm", inst.primary_node, l);
  });
  EXPECT_TRUE(log.lines().empty());
  EXPECT_EQ(cluster->storage().pair(inst.disks[0].uuid).side(inst.primary_node).role, DrbdRole::kSecondary);
}

// Random carve sequences never break free = total - sum(LV sizes).
TEST(CapacityProperty, FreeSpaceConservation) {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    Fixture f;
    std::mt19937 rng(seed);
    const std::vector<std::string> nodes = {kNode1, kNode2, kNode3};
    for (int i = 0; i < 60; ++i) {
      const MiB size = 1 + static_cast<MiB>(rng() % 8192);
      const std::string a = nodes[rng() % 3];
      std::string b = nodes[rng() % 3];
      try {
        if (a != b && rng() % 2 == 0) {
          f.drbd(size, a, b);
        } else {
          provision_instance_disks(f.config, f.storage, DiskTemplate::kPlain, size, a, std::nullopt);
        }
      } catch (const Error&) {
      }
      for (const std::string& n : nodes) {
        MiB used = 0;
        for (const auto& [key, lv] : f.storage.lvs()) {
          if (lv.node == n) used += lv.size;
        }
        const VolumeGroup& g = f.storage.vg(n, "ganeti");
        ASSERT_EQ(g.free, g.total - used);
        ASSERT_GE(g.free, 0);
      }
    }
  }
}

// An LV is orphan exactly when no disk child references it.
TEST(OrphanProperty, MatchesBruteForceOverRecords) {
  auto cluster = testing::make_lab_cluster();
  testing::JobRunner jobs(*cluster);
  testing::add_walkthrough_instances(*cluster, jobs);
  cluster->storage().create_lv(kNode2, "ganeti", "stray", 64, LvRole::kData);
  cluster->storage().create_lv(kNode3, "ganeti", "stray2", 32, LvRole::kMeta);

  std::set<LvRef> referenced;
  for (const auto& [name, inst] : cluster->config().instances) {
    for (const DiskSpec& d : inst.disks) referenced.insert(d.children.begin(), d.children.end());
  }
  std::set<LvRef> expected;
  for (const auto& [key, lv] : cluster->storage().lvs()) {
    LvRef ref{lv.node, lv.vg, lv.lv_name};
    if (referenced.count(ref) == 0) expected.insert(ref);
  }
  auto found = orphan_volumes(*cluster);
  EXPECT_EQ(std::set<LvRef>(found.begin(), found.end()), expected);
  EXPECT_EQ(expected.size(), 2u);
}

// Both sides primary only ever happens inside a migrate job.
TEST(DualPrimaryWindows, EnclosedByMigrateJobs) {
  auto cluster = testing::make_lab_cluster();
  testing::JobRunner jobs(*cluster);
  testing::add_walkthrough_instances(*cluster, jobs);
  std::set<std::int64_t> migrate_jobs;
  for (int i = 0; i < 3; ++i) {
    jobs.run([&](JobLog& log) { migrate(*cluster, log, testing::kTestvm); });
    migrate_jobs.insert(jobs.last_id());
  }
  jobs.run([&](JobLog& log) { failover(*cluster, log, {testing::kTestvm, false}); });
  int dual = 0;
  for (const TransitionRecord& t : cluster->storage().transitions()) {
    if (t.primaries_after == 2) {
      ++dual;
      EXPECT_EQ(migrate_jobs.count(t.job), 1u) << "job " << t.job;
    }
  }
  EXPECT_EQ(dual, 3);
  for (const auto& [uuid, p] : cluster->storage().pairs()) EXPECT_LE(p.primaries(), 1);
}

}  // namespace
}  // namespace gantry
