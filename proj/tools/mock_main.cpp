// Serves the deterministic mock completion endpoint until killed.

#include <iostream>

#include <CLI11.hpp>

#include "planprobe/mock_endpoint.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deterministic mock completion endpoint", "planprobe-mock"};
  planprobe::mock::MockOptions opt;
  opt.port = 8000;
  app.add_option("--host", opt.host, "bind address");
  app.add_option("--port", opt.port, "bind port");
  app.add_option("--max-values", opt.max_values, "values per response before stopping");
  app.add_option("--fail-first", opt.fail_first, "answer this many requests with 503 first");
  CLI11_PARSE(app, argc, argv);
  try {
    planprobe::mock::MockCompletionServer server(opt);
    std::cout << "serving on http://" << opt.host << ':' << opt.port << std::endl;
    server.run();
  } catch (const planprobe::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
