// Cluster daemon: owns the simulated lab and the job queue, serves the /2 API.
#include <csignal>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "CLI11.hpp"
#include "gantry/api.hpp"
#include "gantry/jobs.hpp"
#include "gantry/lab.hpp"
#include "gantry/serialize.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Cluster daemon", "gantryd"};
  std::string state_dir = gantry::default_state_dir().string();
  std::string addr;
  bool lab = false;
  std::uint64_t seed = 1;
  std::int64_t epoch = gantry::SimClock::kDefaultEpoch;
  app.add_option("--state-dir", state_dir, "Where config.data and sim.json live (CLUSTER_STATE_DIR)");
  app.add_option("--addr", addr, "host:port to listen on (GANTRY_ADDR, default 127.0.0.1:5080)");
  app.add_flag("--lab", lab, "Rack the three-machine lab when starting without saved state");
  app.add_option("--seed", seed, "Identity generator seed for a fresh cluster");
  app.add_option("--epoch", epoch, "Unix time of simulated t=0 for a fresh cluster");
  CLI11_PARSE(app, argc, argv);

  try {
    const gantry::Endpoint ep = addr.empty() ? gantry::default_endpoint() : gantry::parse_endpoint(addr);
    std::unique_ptr<gantry::Cluster> cluster = gantry::load_state(state_dir);
    if (cluster) {
      std::cerr << "gantryd: loaded state from " << state_dir << "\n";
    } else {
      cluster = std::make_unique<gantry::Cluster>(epoch, seed);
      if (lab) gantry::setup_lab(*cluster);
    }

    // Signals are taken by a dedicated thread, so block them everywhere else.
    sigset_t sigs;
    sigemptyset(&sigs);
    sigaddset(&sigs, SIGINT);
    sigaddset(&sigs, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

    gantry::Service service(std::move(cluster), std::filesystem::path(state_dir));
    gantry::ApiRouter router(service);
    gantry::HttpServer server(router);
    if (server.bind(ep.host, ep.port) < 0) {
      std::cerr << "gantryd: cannot listen on " << ep.host << ":" << ep.port << "\n";
      return 1;
    }
    std::thread waiter([&] {
      int sig = 0;
      sigwait(&sigs, &sig);
      server.stop();
    });
    std::cerr << "gantryd: listening on " << ep.host << ":" << ep.port << "\n";
    server.serve();
    if (waiter.joinable()) {
      pthread_kill(waiter.native_handle(), SIGTERM);
      waiter.join();
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "gantryd: " << e.what() << "\n";
    return 1;
  }
}
