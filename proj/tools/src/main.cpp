#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "mrg_tools/commands.hpp"

namespace {

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("MRG_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(level));
}

void add_common(CLI::App* cmd, mrg::tools::CommandOptions& o) {
  cmd->add_option("--config", o.config, "Experiment configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--model", o.model, "Loading model: pq, sq, ctm, ltm or linear");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd->add_option("--episodes", o.episodes, "Training episode budget")->check(CLI::NonNegativeNumber);
  cmd->add_option("--iterations", o.iterations, "Baseline iteration budget")->check(CLI::NonNegativeNumber);
  cmd->add_option("--parallel-rollouts", o.parallel_rollouts, "Concurrent training episodes")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Markov routing game: network loading, multi-agent route learning and equilibrium baseline"};
  app.require_subcommand(1);

  mrg::tools::CommandOptions options;
  auto* simulate = app.add_subcommand("simulate", "Load the network with fixed routes and write link traces");
  add_common(simulate, options);
  simulate->add_option("--policy", options.policy, "Policy table written by train")->check(CLI::ExistingFile);
  simulate->add_option("--proportions", options.proportions, "Route proportions written by baseline")
      ->check(CLI::ExistingFile);
  auto* train = app.add_subcommand("train", "Train agents with mean-field multi-agent deep Q-learning");
  add_common(train, options);
  auto* baseline = app.add_subcommand("baseline", "Solve the equilibrium with the iterative fixed-point method");
  add_common(baseline, options);
  auto* compare = app.add_subcommand("compare", "Run both solvers and report the equilibrium gap");
  add_common(compare, options);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return mrg::tools::cmd_simulate(options);
    if (*train) return mrg::tools::cmd_train(options);
    if (*baseline) return mrg::tools::cmd_baseline(options);
    if (*compare) return mrg::tools::cmd_compare(options);
  } catch (const mrg::tools::UsageError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const mrg::ConfigError& e) {
    spdlog::error("configuration: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}
