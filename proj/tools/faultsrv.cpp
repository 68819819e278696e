// Fault-injection server for loopback runs of the suite.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <thread>

#include "qtracker/faultsrv/server.hpp"

using namespace qtracker;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QUIC responder with an injectable fault"};
  std::string listen = "127.0.0.1:4433";
  std::string fault_name = "none";
  std::size_t body_size = 160;
  std::uint64_t seed = 0;
  bool list = false;
  app.add_option("--listen", listen, "address:port to bind");
  app.add_option("--fault", fault_name, "fault to inject, or none");
  app.add_option("--body-size", body_size, "size of /index.html")->check(CLI::Range(160, 1 << 24));
  app.add_option("--seed", seed, "handshake provider seed, shared with the client");
  app.add_flag("--list-faults", list, "print the faults and exit");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    std::cout << "none\n";
    for (auto f : faultsrv::all_faults()) {
      std::cout << faultsrv::to_string(f) << "\t" << faultsrv::describe(f) << "\n";
    }
    return 0;
  }
  const auto fault = faultsrv::fault_from_string(fault_name);
  if (!fault) {
    std::cerr << "unknown fault: " << fault_name << " (see --list-faults)\n";
    return 2;
  }

  faultsrv::ServerConfig cfg;
  cfg.listen = listen;
  cfg.fault = *fault;
  cfg.seed = seed;
  cfg.resources["/index.html"] = faultsrv::make_body(body_size);
  try {
    faultsrv::Server server(cfg);
    server.start();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on " << server.address() << ", fault " << fault_name << "\n";
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    std::cerr << server.connections_accepted() << " connections\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
