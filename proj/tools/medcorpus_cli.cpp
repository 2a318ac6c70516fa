// medcorpus: command-line driver for the corpus pipeline.
#include <CLI11.hpp>

#include <iostream>

#include "medcorpus/error.hpp"
#include "medcorpus/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace medcorpus;
  CLI::App app{"Build traceable medical instruction corpora and staged training plans"};
  app.require_subcommand(1);

  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  app.add_option("--config", config_file, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the root seed");
  app.add_option("--output", output, "Override the output directory");

  auto* ingest = app.add_subcommand("ingest", "Load registered datasets and write the canonical corpus");

  auto* generate = app.add_subcommand("generate", "Generate instruction samples from the canonical corpus");
  std::optional<std::string> backend;
  std::optional<std::size_t> max_requests;
  generate->add_option("--backend", backend, "Generation backend")->check(CLI::IsMember({"mock", "http"}));
  generate->add_option("--max-requests", max_requests, "Stop after sending this many requests (resume later)");

  auto* compose = app.add_subcommand("compose", "Build stage mixes, packed sequences and the training plan");
  bool no_review = false;
  compose->add_flag("--no-review", no_review, "Build stage III from the raw mix table");

  auto* stats = app.add_subcommand("stats", "Report corpus distributions");
  auto* plan = app.add_subcommand("plan", "Re-emit the training plan from composed manifests");

  auto* serve = app.add_subcommand("review-serve", "Run the quality review HTTP service");
  int port = -1;
  serve->add_option("--port", port, "Listen port (0 picks a free port)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = RunConfig::load(config_file, seed,
                                     output ? std::optional<std::filesystem::path>(*output) : std::nullopt);
    if (ingest->parsed()) return cmd_ingest(cfg, std::cerr);
    if (generate->parsed()) return cmd_generate(cfg, {backend, max_requests, nullptr}, std::cerr);
    if (compose->parsed()) return cmd_compose(cfg, {no_review}, std::cerr);
    if (stats->parsed()) return cmd_stats(cfg, std::cout, std::cerr);
    if (plan->parsed()) return cmd_plan(cfg, std::cerr);
    if (serve->parsed()) return cmd_review_serve(cfg, port, std::cerr);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}
