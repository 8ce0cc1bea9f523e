#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gantry/api.hpp"
#include "gantry/cluster_model.hpp"

namespace gantry {

struct CliOptions {
  /// Skip confirmations as if answered "y".
  bool assume_yes = false;
  /// Write the answer read from `in` after the prompt (non-interactive input).
  bool echo_answer = false;
  /// Machine the command is typed on; unset means the master.
  std::optional<std::string> issued_on;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// argv[0] selects the suite: gnt-cluster, gnt-node, gnt-instance, gnt-os,
/// gnt-sim, or "gnt <suite> ..." with the prefix left off.
int run_cli(const std::vector<std::string>& argv, ApiClient& client, std::istream& in, std::ostream& out,
            std::ostream& err, const CliOptions& opts = {});

/// Capacity display: one decimal of GiB from 1024 MiB up, else whole MiB.
std::string format_display_size(MiB size);

/// Space-separated columns padded to the widest cell, header first.
/// Columns listed in `right` are right-aligned. Trailing blanks trimmed.
std::string render_table(const std::vector<std::string>& headers, const std::vector<std::vector<std::string>>& rows,
                         const std::set<std::size_t>& right = {});

/// `gnt-node list` from the /2/nodes payload.
std::string render_node_list(const nlohmann::json& nodes);
/// `gnt-instance info` from the /2/instances/<name> payload.
std::string render_instance_info(const nlohmann::json& info);

inline constexpr std::string_view kMigratePrompt =
    "Instance {} will be migrated. Note that migration\n"
    "might impact the instance if anything goes wrong (e.g. due to bugs in\n"
    "the hypervisor). Continue?\n";
inline constexpr std::string_view kFailoverPrompt =
    "Failover will happen to image {}. This requires a\n"
    "shutdown of the instance. Continue?\n";
inline constexpr std::string_view kHotplugPrompt =
    "You are about to hot-modify a NIC. This will be done by removing the\n"
    "existing NIC and then adding a new one. Network connection might be\n"
    "lost. Continue?\n";
inline constexpr std::string_view kPromptChoices = "y/[n]?: ";
inline constexpr std::string_view kModifyReminder =
    "Please don't forget that most parameters take effect only at the next (re)start of the instance "
    "initiated by ganeti; restarting from within the instance will not be enough.\n";

}  // namespace gantry
