#pragma once

/// @file learner.hpp
/// @brief Tabular Q-learning and mean-field multi-agent deep Q-learning.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrg/approximator.hpp"
#include "mrg/game.hpp"

namespace mrg {

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// Engine for one episode, derived from the run seed and the episode index.
[[nodiscard]] Rng episode_rng(std::uint64_t seed, std::uint64_t episode);

/// Highest-valued action, ties to the lowest LinkId.
[[nodiscard]] LinkId greedy_action(const std::vector<LinkId>& allowable, const std::function<double(LinkId)>& value);

/// Uniform random action with probability epsilon, else greedy.
[[nodiscard]] LinkId epsilon_greedy(const std::vector<LinkId>& allowable, const std::function<double(LinkId)>& value,
                                    double epsilon, Rng& rng);

/// Action values keyed by (observation, action); unvisited entries are zero.
class TabularQ {
 public:
  [[nodiscard]] double value(const Observation& o, LinkId a) const;
  [[nodiscard]] double best(const Observation& o, const std::vector<LinkId>& actions) const;
  /// Q <- Q + eta (r + max_a' Q(o', a') - Q); the bootstrap is zero when terminal.
  double update(const Observation& o, LinkId a, double reward, const Observation& next,
                const std::vector<LinkId>& next_actions, bool terminal, double eta);
  [[nodiscard]] const std::map<std::pair<Observation, LinkId>, double>& values() const noexcept { return values_; }

 private:
  std::map<std::pair<Observation, LinkId>, double> values_;
};

struct TabularConfig {
  int episodes{200};
  double learning_rate{1.0};
  double epsilon_start{1.0};
  double epsilon_end{0.0};
  double decay_fraction{0.6};
  std::uint64_t seed{1};
};

struct TabularResult {
  TabularQ q;
  EpisodeResult greedy;
  /// Node sequence of the first agent in the greedy episode.
  std::vector<NodeId> route;
};

/// Independent tabular learners sharing one table (mean action ignored).
[[nodiscard]] TabularResult train_tabular(const Experiment& experiment, const TabularConfig& config);

/// Bounded ring of experiences, oldest evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000);
  void push(Experience e);
  [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
  [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
  [[nodiscard]] const Experience& at(std::size_t i) const { return items_.at(i); }
  /// Indices of min(k, size) distinct elements drawn uniformly (Floyd's algorithm).
  [[nodiscard]] std::vector<std::size_t> sample_indices(std::size_t k, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Experience> items_;
};

enum class OptimizerKind { Sgd, Adam };

struct LearnerConfig {
  int episodes{500};
  double epsilon_start{1.0};
  double epsilon_end{0.02};
  double epsilon_decay_fraction{0.6};
  double learning_rate{1e-3};
  double learning_rate_decay{0.99};
  double learning_rate_floor{0.0};
  OptimizerKind optimizer{OptimizerKind::Sgd};
  std::size_t buffer_capacity{50000};
  std::size_t batch_size{64};
  int updates_per_episode{10};
  int target_period{5};
  std::vector<int> hidden{64, 64};
  int convergence_window{20};
  int convergence_patience{50};
  double convergence_tolerance{0.01};
  bool stop_at_convergence{true};
  int parallel_rollouts{1};
  std::uint64_t seed{1};

  /// Reads known keys from free-form experiment options, keeping defaults otherwise.
  static LearnerConfig from_options(const std::map<std::string, std::string>& options, std::uint64_t seed);
  [[nodiscard]] double epsilon_at(int episode) const noexcept;
  [[nodiscard]] double learning_rate_at(int episode) const noexcept;
};

/// Shared action-value approximator for agents of one group. The network
/// predicts Q divided by the horizon so targets stay of order one.
class QGroup {
 public:
  QGroup(const QEncoder& encoder, const std::vector<int>& hidden, int horizon, std::uint64_t seed);

  [[nodiscard]] double value(const Observation& o, LinkId a, double mean_action) const;
  [[nodiscard]] double target_value(const Observation& o, LinkId a, double mean_action) const;
  /// r if terminal, else r + max over next actions of the target network at
  /// the recorded mean-action estimates.
  [[nodiscard]] double td_target(const Experience& e) const;
  /// One optimizer step on a batch of experiences; returns the pre-step loss.
  double train(const std::vector<const Experience*>& batch, double learning_rate, OptimizerKind optimizer);
  void sync_target() { target_ = live_; }

  [[nodiscard]] const Mlp& live() const noexcept { return live_; }
  [[nodiscard]] const Mlp& target() const noexcept { return target_; }

 private:
  const QEncoder* encoder_;
  double scale_;
  Mlp live_;
  Mlp target_;
  AdamState adam_;
};

/// Per-agent observation -> action dictionaries, in Environment::agents() order.
struct PolicyTable {
  std::vector<VehicleId> agents;
  std::vector<std::map<Observation, LinkId>> entries;

  [[nodiscard]] std::optional<LinkId> lookup(std::size_t agent_slot, const Observation& o) const;
  [[nodiscard]] std::string to_text() const;
  static PolicyTable from_text(const std::string& text);
};

/// Dictionaries built from the decisions of one episode.
[[nodiscard]] PolicyTable extract_policy(const Environment& env, const EpisodeResult& episode);

struct EpisodeTrace {
  int episode{0};
  double average_travel_time{0.0};
  double epsilon{0.0};
  double learning_rate{0.0};
  std::vector<double> loss;  // per group, mean over the episode's updates
};

struct TrainingResult {
  PolicyTable policy;
  std::vector<EpisodeTrace> trace;
  std::vector<QGroup> groups;
  EpisodeResult greedy;
  bool converged{false};
  int converged_episode{-1};
  std::shared_ptr<const Experiment> experiment;
  std::shared_ptr<const QEncoder> encoder;
};

/// Runs the training loop and returns the greedy joint policy.
[[nodiscard]] TrainingResult train_mfmadql(const Experiment& experiment, const LearnerConfig& config);

/// Follows the policy table, falling back to the greedy action of the trained
/// groups for observations not in an agent's dictionary.
[[nodiscard]] ActionSelector policy_selector(const TrainingResult& trained);

struct DeviationReport {
  std::vector<double> returns;            // per agent under the joint policy
  std::vector<double> deviation_returns;  // best return after changing the agent's first action
  std::vector<LinkId> deviation_actions;
};

/// Replays the joint policy, then, for each agent in turn, every alternative
/// first action while other agents keep their policies.
[[nodiscard]] DeviationReport unilateral_deviation(const TrainingResult& trained);

}  // namespace mrg
