#pragma once

/// @file game.hpp
/// @brief The routing game: atomic agents choose outbound links en route on
/// top of a dynamic network loading model.

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "mrg/dnl.hpp"
#include "mrg/network.hpp"

namespace mrg {

struct Observation {
  NodeId node;
  int time{0};
  auto operator<=>(const Observation&) const = default;
};

/// One agent transition. `next_actions` / `next_mean_actions` hold the
/// allowable actions at the next observation and the mean-action estimates
/// seen when that decision was taken; both are empty for terminal transitions.
struct Experience {
  VehicleId agent{-1};
  int group{0};
  Observation observation;
  LinkId action;
  Observation next;
  double reward{0.0};
  double mean_action{0.0};
  bool terminal{false};
  std::vector<LinkId> next_actions;
  std::vector<double> next_mean_actions;
};

[[nodiscard]] constexpr double reward_of_traversal(int entry, int exit) noexcept {
  return -static_cast<double>(exit - entry);
}

class Environment {
 public:
  explicit Environment(std::shared_ptr<const Experiment> experiment);
  explicit Environment(const Experiment& experiment) : Environment(std::make_shared<const Experiment>(experiment)) {}

  /// Places every vehicle on its origin's dummy link at clock 0. Loading is
  /// fully determined by the experiment, so no seed is involved.
  void reset();
  /// Keep per-step link traces in the loader across resets.
  void enable_trace(bool on);

  [[nodiscard]] const Experiment& experiment() const noexcept { return *experiment_; }
  [[nodiscard]] const Network& network() const noexcept { return experiment_->network; }
  [[nodiscard]] const Loader& loader() const noexcept { return *loader_; }
  [[nodiscard]] Loader& loader() noexcept { return *loader_; }
  [[nodiscard]] int clock() const noexcept { return loader_->clock(); }
  [[nodiscard]] int horizon() const noexcept { return experiment_->settings.horizon; }

  /// Controllable vehicles in ascending id.
  [[nodiscard]] const std::vector<VehicleId>& agents() const noexcept { return agents_; }
  [[nodiscard]] bool is_agent(VehicleId v) const { return group_of_[static_cast<std::size_t>(v)] >= 0; }
  [[nodiscard]] int group(VehicleId agent) const { return group_of_.at(static_cast<std::size_t>(agent)); }
  [[nodiscard]] int group_count() const noexcept { return group_count_; }
  [[nodiscard]] NodeId group_destination(int group) const { return group_destination_.at(static_cast<std::size_t>(group)); }
  /// Number of vehicles a link can hold in the mean-action feature: agents plus background.
  [[nodiscard]] double mean_action_scale() const noexcept;

  /// Agents waiting at a link head away from their destination with no standing choice.
  [[nodiscard]] std::vector<VehicleId> deciding() const;
  [[nodiscard]] Observation observation(VehicleId agent) const;
  [[nodiscard]] const std::vector<LinkId>& allowable(VehicleId agent) const;
  /// Expected flow on `link` right after one more vehicle enters: current
  /// occupancy, plus vehicles already committed to it, plus the entering vehicle.
  [[nodiscard]] double mean_action_estimate(LinkId link) const;

  void choose(VehicleId agent, LinkId link);
  StepResult step();
  /// Applies the given choices to deciding agents, then steps.
  StepResult step(const std::vector<std::pair<VehicleId, LinkId>>& joint);
  [[nodiscard]] bool done() const;
  [[nodiscard]] bool agents_done() const;

 private:
  std::shared_ptr<const Experiment> experiment_;
  std::optional<Loader> loader_;
  std::vector<VehicleId> agents_;
  std::vector<int> group_of_;  // by vehicle id, -1 for background
  std::vector<NodeId> group_destination_;
  int group_count_{0};
  int background_{0};
  bool trace_{false};
};

/// Chooses an action for a deciding agent.
using ActionSelector =
    std::function<LinkId(const Environment&, VehicleId, const Observation&, const std::vector<LinkId>&)>;

struct Decision {
  Observation observation;
  LinkId action;
};

struct EpisodeResult {
  std::vector<Experience> experiences;
  /// Per agent, in the order of Environment::agents().
  std::vector<double> travel_times;
  std::vector<double> returns;
  std::vector<std::vector<Decision>> decisions;
  double average_travel_time{0.0};
  int timed_out{0};
};

/// Resets the environment and plays one episode until every agent arrives or
/// the horizon is reached. Agents still travelling at the horizon T receive
/// their elapsed time plus a penalty of T, and are counted with travel time
/// T minus departure.
EpisodeResult run_episode(Environment& env, const ActionSelector& select);

}  // namespace mrg
