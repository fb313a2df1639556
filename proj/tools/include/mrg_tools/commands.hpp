#pragma once

// Subcommands of the mrg tool. Each returns a process exit code:
// 0 success, 1 runtime or convergence failure, 2 usage or configuration error.

#include <optional>
#include <string>

#include "mrg/baseline.hpp"
#include "mrg/learner.hpp"
#include "mrg/network.hpp"

namespace mrg::tools {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommandOptions {
  std::string config;
  std::optional<std::string> model;
  std::optional<std::uint64_t> seed;
  std::string out{"out"};
  std::optional<int> episodes;
  std::optional<int> iterations;
  std::optional<int> parallel_rollouts;
  std::optional<std::string> policy;
  std::optional<std::string> proportions;
};

/// Loads the config file and applies command-line overrides.
Experiment load_with_overrides(const CommandOptions& options);

int cmd_simulate(const CommandOptions& options);
int cmd_train(const CommandOptions& options);
int cmd_baseline(const CommandOptions& options);
int cmd_compare(const CommandOptions& options);

/// Share of agents per baseline route in an episode, plus a trailing entry
/// for agents whose path is not one of the routes.
std::vector<int> route_split(const Environment& env, const EpisodeResult& episode, const DemandClass& cls);

}  // namespace mrg::tools
