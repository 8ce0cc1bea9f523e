#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gantry/simnode.hpp"

namespace gantry {

class Cluster;

struct OsProvider {
  std::string name;
  /// Variants with both a manifest entry and a config file, manifest order.
  std::vector<std::string> variants;
  std::map<std::string, std::map<std::string, std::string>> variant_config;

  bool operator==(const OsProvider&) const = default;
};

/// OS definitions installed on one node.
struct OsCatalog {
  std::map<std::string, OsProvider> providers;

  /// Sorted "<provider>+<variant>" names.
  std::vector<std::string> names() const;
  bool operator==(const OsCatalog&) const = default;
};

/// "/etc/ganeti/instance-image"
std::string os_provider_dir(std::string_view provider);
/// "/etc/ganeti/instance-image/variants.list"
std::string os_variants_list_path(std::string_view provider);
/// "/etc/ganeti/instance-image/variants/cd.conf"
std::string os_variant_config_path(std::string_view provider, std::string_view variant);

/// One variant per line; blank lines ignored.
std::vector<std::string> parse_variants_list(std::string_view text);
/// KEY="value" lines; quotes and surrounding blanks stripped.
std::map<std::string, std::string> parse_variant_config(std::string_view text);

OsCatalog node_os_catalog(const SimNode& node);

struct OsSpec {
  std::string provider;
  std::string variant;
};

/// "image+cd" -> {image, cd}; a bare provider means its default variant.
OsSpec parse_os_spec(std::string_view text);

/// Names available on every reachable member node.
std::vector<std::string> os_list(const Cluster& cluster);

}  // namespace gantry
