#include <CLI11.hpp>

#include <iostream>

#include "sbs/sbs.hpp"

int main(int argc, char** argv) {
  CLI::App app{"String-bond-state variational Monte Carlo"};
  app.require_subcommand(1);

  std::string config, checkpoint, resume;
  auto* opt = app.add_subcommand("optimize", "optimize a state; writes trajectory CSV and checkpoint");
  opt->add_option("--config", config, "run configuration")->required();
  opt->add_option("--resume", resume, "continue from this checkpoint");

  auto* sweep = app.add_subcommand("sweep", "optimize over model.h_values with warm starts");
  sweep->add_option("--config", config, "run configuration")->required();

  auto* meas = app.add_subcommand("measure", "sample energy and observables of a checkpoint");
  meas->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  meas->add_option("--config", config, "run configuration")->required();

  sbs::CheckOptions check_opts;
  bool no_timing = false;
  auto* check = app.add_subcommand("check", "run the embedded invariant suite");
  check->add_flag("--corrupt-cache", check_opts.corrupt_cache, "mutation test: skip cache invalidation");
  check->add_flag("--no-timing", no_timing, "skip the cost-scaling measurement");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? sbs::kExitSuccess : sbs::kExitInputError;
  }

  try {
    if (*check) {
      check_opts.timing = !no_timing;
      return sbs::cmd_check(check_opts);
    }
    const auto cfg = sbs::load_config(config);
    if (*opt) return sbs::cmd_optimize(cfg, resume);
    if (*sweep) return sbs::cmd_sweep(cfg);
    if (*meas) return sbs::cmd_measure(cfg, checkpoint);
  } catch (const sbs::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return sbs::kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sbs::kExitRuntimeFailure;
  }
  return sbs::kExitRuntimeFailure;
}
