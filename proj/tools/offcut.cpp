// offcut command line: HTTP service and batch optimization.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <filesystem>
#include <iostream>

#include "offcut/error.hpp"
#include "offcut/io.hpp"
#include "offcut/optimizer.hpp"
#include "offcut/service.hpp"

namespace {

offcut::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const std::string& host, int port) {
  offcut::HttpServer server;
  const int bound = server.bind(host, port);
  if (bound < 0) {
    fmt::print(stderr, "cannot bind {}:{}\n", host, port);
    return 1;
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  fmt::print("listening on http://{}:{}\n", host, bound);
  std::fflush(stdout);
  const bool ok = server.run();
  g_server = nullptr;
  return ok ? 0 : 1;
}

int run_optimize(const std::string& file, const offcut::SearchConfig& config, const std::string& out) {
  using namespace offcut;
  const DesignDocument doc = load_design_file(file);
  const Problem problem = doc.problem();
  const DesignParams start = doc.initial();
  const SearchResult result = min_wastage(problem, start, config);
  if (result.results.empty()) {
    fmt::print(stderr, "no layout: {}\n", result.diagnostic);
    return 2;
  }
  const std::vector<std::size_t> picks = select_suggestions(result.results, *problem.evaluator);
  const ExplorationResult& best = result.results.front();
  const double before = best.path.empty() ? best.wastage : best.path.front().wastage;
  fmt::print("wastage {:.6f} -> {:.6f} ({} results)\n", before, best.wastage, result.results.size());
  if (out.empty()) return 0;

  std::filesystem::create_directories(out);
  write_file(out + "/result.json", dump_canonical(result_json(doc, config, result, picks)));
  write_file(out + "/best.design.json", save_design(with_parameters(doc, best.x)));
  const std::vector<Part> parts = problem.evaluator->evaluate(best.x);
  const auto svgs = export_svg(best.layout, parts, doc.boards, doc.raster_res);
  for (std::size_t b = 0; b < svgs.size(); ++b) {
    write_file(fmt::format("{}/board-{}.plan.svg", out, b + 1), svgs[b]);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offcut: design layouts that waste less material"};
  app.require_subcommand(1);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--port", port, "port to listen on (0 picks one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "address to bind");

  std::string file;
  std::string out;
  offcut::SearchConfig config;
  auto* optimize = app.add_subcommand("optimize", "optimize a design file");
  optimize->add_option("file", file, "design file (.design.json)")->required()->check(CLI::ExistingFile);
  optimize->add_option("--seed", config.seed, "master seed");
  optimize->add_option("--out", out, "output directory for result.json and plan SVGs");
  optimize->add_option("--workers", config.workers, "worker threads")->check(CLI::PositiveNumber);
  optimize->add_option("--generations", config.generations, "generations")->check(CLI::NonNegativeNumber);
  optimize->add_option("--keep", config.keep, "designs kept per generation")->check(CLI::PositiveNumber);
  optimize->add_option("--improve-iterations", config.improve_iterations, "grow/shrink rounds per design")
      ->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*serve) return run_serve(host, port);
    return run_optimize(file, config, out);
  } catch (const offcut::SchemaError& e) {
    fmt::print(stderr, "invalid design: {}\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
