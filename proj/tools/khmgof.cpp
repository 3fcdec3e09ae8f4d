// khmgof: goodness-of-fit tests for error distributions in nonparametric
// regression, via the martingale-transformed residual empirical process.
//
// Exit codes: 0 success, 2 parse error, 3 domain error, 4 experiment failure,
// 1 anything else.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "khmgof/commands.hpp"

namespace {

int dispatch(const std::string& command, const khmgof::RunConfig& config) {
  if (command == "test") {
    const khmgof::TestReport report = khmgof::cmd_test(config);
    std::cout << khmgof::report_text(report);
    return 0;
  }
  if (command == "simulate") {
    khmgof::cmd_simulate(config, std::cout);
    return 0;
  }
  khmgof::cmd_diagnose(config, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution-free goodness-of-fit tests for regression errors"};
  app.require_subcommand(1);
  khmgof::RunConfig config;
  std::string scale = "known";

  CLI::App* test = app.add_subcommand("test", "Test one CSV of (x, y) pairs");
  test->add_option("--input", config.input_path, "CSV file with header x,y")->required();
  test->add_option("--family", config.family, "normal|logistic|laplace[:alpha]|t:k");
  test->add_option("--bandwidth", config.bandwidth, "window half-width a");
  test->add_option("--level", config.level, "test level in (0,1)");
  test->add_option("--scale", scale, "known|estimate")
      ->check(CLI::IsMember({"known", "estimate"}));
  test->add_option("--seed", config.seed, "seed recorded in the report");
  test->add_option("--out", config.output_dir, "output directory");

  CLI::App* sim = app.add_subcommand("simulate", "Seeded null / power experiments");
  sim->add_option("--n", config.n, "sample size")->required();
  sim->add_option("--reps", config.reps, "replicates")->required();
  sim->add_option("--family", config.family, "null family spec");
  sim->add_option("--bandwidths", config.bandwidths, "comma-separated window half-widths")
      ->delimiter(',');
  sim->add_option("--levels", config.levels, "comma-separated test levels")->delimiter(',');
  sim->add_option("--alt-weight", config.alt_weight, "contamination weight in [0,1]");
  sim->add_option("--alt-family", config.alt_family, "contaminant family spec");
  sim->add_option("--seed", config.seed, "master seed");
  sim->add_option("--out", config.output_dir, "output directory");

  CLI::App* diag = app.add_subcommand("diagnose", "Family numeric diagnostics");
  diag->add_option("--family", config.family, "family spec")->required();
  diag->add_flag("--bridge-check", config.bridge_check, "run the bridge divergence check");
  diag->add_option("--seed", config.seed, "seed for the bridge check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  config.scale_mode =
      scale == "estimate" ? khmgof::ScaleMode::kEstimate : khmgof::ScaleMode::kKnown;

  try {
    if (test->parsed()) return dispatch("test", config);
    if (sim->parsed()) return dispatch("simulate", config);
    return dispatch("diagnose", config);
  } catch (const khmgof::ParseError& e) {
    std::fprintf(stderr, "parse error: %s", e.what());
    if (e.line() > 0) std::fprintf(stderr, " (line %zu)", e.line());
    std::fprintf(stderr, "\n");
    return 2;
  } catch (const khmgof::ExperimentError& e) {
    std::fprintf(stderr, "experiment failure: %s\n", e.what());
    return 4;
  } catch (const khmgof::DomainError& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
