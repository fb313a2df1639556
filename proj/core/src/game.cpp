#include "mrg/game.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

namespace mrg {

Environment::Environment(std::shared_ptr<const Experiment> experiment) : experiment_(std::move(experiment)) {
  validate_demand(experiment_->network, experiment_->demand, experiment_->settings.horizon);
  reset();

  std::map<std::pair<NodeId, int>, int> groups;
  const auto& vehicles = loader_->vehicles();
  group_of_.assign(vehicles.size(), -1);
  for (const auto& v : vehicles) {
    if (v.is_background()) {
      ++background_;
      continue;
    }
    const auto key = std::make_pair(v.destination, v.group);
    auto [it, fresh] = groups.emplace(key, group_count_);
    if (fresh) {
      ++group_count_;
      group_destination_.push_back(v.destination);
    }
    group_of_[static_cast<std::size_t>(v.id)] = it->second;
    agents_.push_back(v.id);
  }
}

void Environment::reset() {
  loader_.emplace(experiment_->network, experiment_->demand, experiment_->settings.model,
                  experiment_->settings.discipline);
  loader_->enable_trace(trace_);
}

void Environment::enable_trace(bool on) {
  trace_ = on;
  loader_->enable_trace(on);
}

double Environment::mean_action_scale() const noexcept {
  return std::max(1.0, static_cast<double>(agents_.size() + static_cast<std::size_t>(background_)));
}

std::vector<VehicleId> Environment::deciding() const {
  std::vector<VehicleId> out;
  for (VehicleId a : agents_) {
    const auto& v = loader_->vehicle(a);
    if (v.status == VehicleStatus::Arrived || v.choice || !loader_->at_head(a)) continue;
    if (loader_->current_node(a) == v.destination) continue;
    out.push_back(a);
  }
  return out;
}

Observation Environment::observation(VehicleId agent) const {
  const auto& v = loader_->vehicle(agent);
  if (v.status == VehicleStatus::Arrived) return {v.destination, v.arrival_step};
  return {loader_->current_node(agent), std::min(v.ready_step, horizon())};
}

const std::vector<LinkId>& Environment::allowable(VehicleId agent) const {
  return network().outbound_links(loader_->current_node(agent));
}

double Environment::mean_action_estimate(LinkId link) const {
  return static_cast<double>(loader_->state(link).occupancy() + loader_->committed(link) + 1);
}

void Environment::choose(VehicleId agent, LinkId link) {
  if (!is_agent(agent)) throw SimulationError(fmt::format("vehicle {} is not a controllable agent", agent));
  loader_->set_choice(agent, link);
}

StepResult Environment::step() {
  if (clock() >= horizon()) throw SimulationError("episode horizon reached");
  return loader_->step();
}

StepResult Environment::step(const std::vector<std::pair<VehicleId, LinkId>>& joint) {
  for (const auto& [agent, link] : joint) choose(agent, link);
  return step();
}

bool Environment::done() const { return clock() >= horizon() || loader_->finished(); }

bool Environment::agents_done() const {
  return clock() >= horizon() || std::all_of(agents_.begin(), agents_.end(), [&](VehicleId a) {
           return loader_->vehicle(a).status == VehicleStatus::Arrived;
         });
}

EpisodeResult run_episode(Environment& env, const ActionSelector& select) {
  env.reset();
  const auto& agents = env.agents();
  const int horizon = env.horizon();

  std::vector<int> slot(env.loader().vehicles().size(), -1);
  for (std::size_t k = 0; k < agents.size(); ++k) slot[static_cast<std::size_t>(agents[k])] = static_cast<int>(k);

  struct Pending {
    Observation observation;
    LinkId action;
    double mean_action{0.0};
  };
  std::vector<std::optional<Pending>> pending(agents.size());

  EpisodeResult result;
  result.travel_times.assign(agents.size(), 0.0);
  result.returns.assign(agents.size(), 0.0);
  result.decisions.resize(agents.size());

  auto emit = [&](std::size_t k, const Observation& next, double reward, bool terminal, std::vector<LinkId> next_actions,
                  std::vector<double> next_means) {
    const Pending& p = *pending[k];
    Experience e;
    e.agent = agents[k];
    e.group = env.group(agents[k]);
    e.observation = p.observation;
    e.action = p.action;
    e.next = next;
    e.reward = reward;
    e.mean_action = p.mean_action;
    e.terminal = terminal;
    e.next_actions = std::move(next_actions);
    e.next_mean_actions = std::move(next_means);
    result.returns[k] += reward;
    result.experiences.push_back(std::move(e));
    pending[k].reset();
  };

  while (!env.agents_done()) {
    for (VehicleId agent : env.deciding()) {
      const auto k = static_cast<std::size_t>(slot[static_cast<std::size_t>(agent)]);
      const Observation o = env.observation(agent);
      const auto& actions = env.allowable(agent);
      if (actions.empty()) {
        throw SimulationError(fmt::format("agent {} is stuck at node {} with no outbound link", agent, o.node.value));
      }
      if (pending[k]) {
        std::vector<double> means;
        means.reserve(actions.size());
        for (LinkId l : actions) means.push_back(env.mean_action_estimate(l));
        emit(k, o, reward_of_traversal(pending[k]->observation.time, o.time), false, actions, std::move(means));
      }
      const LinkId a = select(env, agent, o, actions);
      const double estimate = env.mean_action_estimate(a);
      env.choose(agent, a);
      pending[k] = Pending{o, a, estimate};
      result.decisions[k].push_back({o, a});
    }

    const StepResult step = env.step();
    for (const auto& [vehicle, link] : step.entries) {
      const int k = slot[static_cast<std::size_t>(vehicle)];
      if (k >= 0 && pending[static_cast<std::size_t>(k)]) {
        auto& mean = pending[static_cast<std::size_t>(k)]->mean_action;
        mean = std::max(mean, static_cast<double>(env.loader().state(link).occupancy()));
      }
    }
    for (const ArrivalEvent& arrival : step.arrivals) {
      const int k = slot[static_cast<std::size_t>(arrival.vehicle)];
      if (k < 0) continue;
      const auto uk = static_cast<std::size_t>(k);
      const auto& v = env.loader().vehicle(arrival.vehicle);
      result.travel_times[uk] = static_cast<double>(arrival.step - v.departure);
      if (pending[uk]) {
        emit(uk, {arrival.destination, arrival.step}, reward_of_traversal(pending[uk]->observation.time, arrival.step),
             true, {}, {});
      }
    }
  }

  for (std::size_t k = 0; k < agents.size(); ++k) {
    const auto& v = env.loader().vehicle(agents[k]);
    if (v.status == VehicleStatus::Arrived) continue;
    ++result.timed_out;
    result.travel_times[k] = static_cast<double>(horizon - v.departure);
    if (pending[k]) {
      const Observation next{env.loader().current_node(agents[k]), horizon};
      const double reward = reward_of_traversal(pending[k]->observation.time, horizon) - static_cast<double>(horizon);
      emit(k, next, reward, true, {}, {});
    }
  }

  double total = 0.0;
  for (double x : result.travel_times) total += x;
  result.average_travel_time = agents.empty() ? 0.0 : total / static_cast<double>(agents.size());
  return result;
}

}  // namespace mrg
