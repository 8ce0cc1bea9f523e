// Runs scenario scripts against an in-process cluster, or a daemon (--addr).
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "gantry/api.hpp"
#include "gantry/error.hpp"
#include "gantry/jobs.hpp"
#include "gantry/lab.hpp"
#include "gantry/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Scenario runner", "gantry-sim"};
  std::vector<std::string> scripts;
  std::string addr;
  std::string state_dir;
  bool lab = false;
  std::uint64_t seed = 1;
  app.add_option("scripts", scripts, "Scenario files, run in order")->required()->check(CLI::ExistingFile);
  app.add_option("--addr", addr, "Drive a running gantryd instead of an in-process cluster");
  app.add_option("--state-dir", state_dir, "Save state here after every job (in-process only)");
  app.add_flag("--lab", lab, "Start from the three-machine lab (in-process only)");
  app.add_option("--seed", seed, "Identity generator seed (in-process only)");
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<gantry::ScenarioStep> steps;
    for (const std::string& path : scripts) {
      std::ifstream in(path);
      auto more = gantry::parse_scenario(in);
      steps.insert(steps.end(), more.begin(), more.end());
    }

    gantry::ScenarioResult result;
    if (!addr.empty()) {
      gantry::HttpApiClient client(gantry::parse_endpoint(addr));
      result = gantry::run_scenario(steps, client);
    } else {
      auto cluster = std::make_unique<gantry::Cluster>(gantry::SimClock::kDefaultEpoch, seed);
      if (lab) gantry::setup_lab(*cluster);
      std::optional<std::filesystem::path> dir;
      if (!state_dir.empty()) dir = state_dir;
      gantry::Service service(std::move(cluster), dir);
      gantry::ApiRouter router(service);
      gantry::InProcessClient client(router);
      result = gantry::run_scenario(steps, client);
    }
    std::cout << result.transcript;
    if (result.failures > 0) {
      std::cerr << "gantry-sim: " << result.failures << " step(s) did not behave as scripted\n";
      return 1;
    }
    return 0;
  } catch (const gantry::Error& e) {
    std::cerr << "gantry-sim: " << e.what() << "\n";
    return 2;
  }
}
