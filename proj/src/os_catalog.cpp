#include "gantry/os_catalog.hpp"

#include <algorithm>
#include <iterator>
#include <set>
#include <sstream>

#include "gantry/cluster.hpp"

namespace gantry {
namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<std::string> OsCatalog::names() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : providers) {
    for (const auto& v : p.variants) out.push_back(name + "+" + v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string os_provider_dir(std::string_view provider) {
  return "/etc/ganeti/instance-" + std::string(provider);
}

std::string os_variants_list_path(std::string_view provider) {
  return os_provider_dir(provider) + "/variants.list";
}

std::string os_variant_config_path(std::string_view provider, std::string_view variant) {
  return os_provider_dir(provider) + "/variants/" + std::string(variant) + ".conf";
}

std::vector<std::string> parse_variants_list(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string v = trim(line);
    if (!v.empty() && std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

std::map<std::string, std::string> parse_variant_config(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string l = trim(line);
    if (l.empty() || l[0] == '#') continue;
    auto eq = l.find('=');
    if (eq == std::string::npos) continue;
    std::string key = trim(std::string_view(l).substr(0, eq));
    std::string value = trim(std::string_view(l).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = trim(std::string_view(value).substr(1, value.size() - 2));
    }
    out[key] = value;
  }
  return out;
}

OsCatalog node_os_catalog(const SimNode& node) {
  OsCatalog cat;
  for (const auto& provider : node.os_providers) {
    OsProvider p;
    p.name = provider;
    auto list = node.files.find(os_variants_list_path(provider));
    if (list != node.files.end()) {
      for (const auto& v : parse_variants_list(list->second)) {
        auto conf = node.files.find(os_variant_config_path(provider, v));
        if (conf == node.files.end()) continue;
        p.variants.push_back(v);
        p.variant_config[v] = parse_variant_config(conf->second);
      }
    }
    cat.providers[provider] = std::move(p);
  }
  return cat;
}

OsSpec parse_os_spec(std::string_view text) {
  auto plus = text.find('+');
  if (plus == std::string_view::npos) return {std::string(text), "default"};
  return {std::string(text.substr(0, plus)), std::string(text.substr(plus + 1))};
}

std::vector<std::string> os_list(const Cluster& cluster) {
  std::vector<std::string> nodes;
  if (cluster.initialized()) {
    for (const auto& [name, rec] : cluster.config().nodes) {
      if (cluster.world().reachable(name)) nodes.push_back(name);
    }
  } else {
    for (const auto& [name, n] : cluster.world().nodes()) {
      if (n.reachable()) nodes.push_back(name);
    }
  }
  if (nodes.empty()) return {};
  std::set<std::string> common;
  bool first = true;
  for (const auto& n : nodes) {
    auto names = node_os_catalog(cluster.world().node(n)).names();
    std::set<std::string> here(names.begin(), names.end());
    if (first) {
      common = std::move(here);
      first = false;
      continue;
    }
    std::set<std::string> keep;
    std::set_intersection(common.begin(), common.end(), here.begin(), here.end(),
                          std::inserter(keep, keep.end()));
    common = std::move(keep);
  }
  return {common.begin(), common.end()};
}

}  // namespace gantry
