#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pssim/cli.hpp"
#include "pssim/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Perfect sampling for lattice particle systems"};
  app.require_subcommand(1);
  pssim::cli::Options opts;
  std::string command;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON run configuration")->required();
    sub->add_option("--seed", opts.seed, "override sampler.seed");
    sub->add_option("--out", opts.out_path, "output path (default: output.path or stdout)");
    sub->callback([&command, sub] { command = sub->get_name(); });
  };
  add_common(app.add_subcommand("sample", "draw perfect or finite-horizon samples as JSONL"));
  auto* diag = app.add_subcommand("diagnose", "print the ladder and the closed-form bounds");
  add_common(diag);
  diag->add_option("--L", opts.range_L, "range for the range-truncation bias");
  diag->add_option("--N", opts.steps_N, "step cap for the tail and step-truncation bias");
  diag->add_option("--t", opts.time_t, "time for the convergence bound");
  add_common(app.add_subcommand("dbar", "estimate the d-bar distance of an ising-pair model"));
  auto* val = app.add_subcommand("validate", "compare the engine against the reference oracles");
  add_common(val);
  val->add_option("--suite", opts.suite, "ladder | law | bounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(pssim::ExitCode::invalid_config);
  }

  try {
    return pssim::cli::run(command, opts, std::cout, std::cerr);
  } catch (const pssim::Error& e) {
    std::cerr << "pssim: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "pssim: internal error: " << e.what() << '\n';
    return static_cast<int>(pssim::ExitCode::internal);
  }
}
