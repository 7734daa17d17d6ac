// Stand-in external generator: echoes "ok: <message>" or replays a file of
// replies, one per line, speaking the POST /generate contract.

#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xchat/generator_client.hpp"
#include "xchat/util.hpp"

namespace {
xchat::generator::StubGenerator* g_stub = nullptr;
}

int main(int argc, char** argv) {
  CLI::App app{"xchat-stub-generator: echo/replay generator for the /generate contract"};
  std::string host = "127.0.0.1";
  int port = 8090;
  std::optional<std::string> replay;
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port (0 picks a free one)");
  app.add_option("--replay", replay, "File of replies, one per line")->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  std::vector<std::string> lines;
  if (replay) {
    for (const auto& l : xchat::util::split(xchat::util::read_file(*replay), '\n')) {
      if (!xchat::util::trim(l).empty()) lines.emplace_back(xchat::util::trim(l));
    }
  }
  try {
    xchat::generator::StubGenerator stub(lines);
    g_stub = &stub;
    auto stop = [](int) {
      if (g_stub) g_stub->shutdown();
    };
    std::signal(SIGINT, stop);
    std::signal(SIGTERM, stop);
    int bound = stub.start(host, port);
    std::cout << "stub generator on http://" << host << ":" << bound << std::endl;
    stub.wait();
    g_stub = nullptr;
  } catch (const xchat::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
