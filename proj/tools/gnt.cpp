// gnt-cluster, gnt-node, gnt-instance, gnt-os and gnt-sim are links to this
// binary; the name it runs under picks the suite.
#include <cstdlib>
#include <iostream>

#include "gantry/api.hpp"
#include "gantry/cli.hpp"
#include "gantry/error.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  gantry::CliOptions opts;
  if (const char* node = std::getenv("GANTRY_NODE"); node != nullptr && *node != '\0') opts.issued_on = node;
  try {
    gantry::HttpApiClient client(gantry::default_endpoint());
    return gantry::run_cli(args, client, std::cin, std::cout, std::cerr, opts);
  } catch (const gantry::Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == gantry::ErrorCode::kUsageError ? gantry::kExitUsage : gantry::kExitFailure;
  }
}
