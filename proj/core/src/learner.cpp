#include "mrg/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace mrg {

Rng episode_rng(std::uint64_t seed, std::uint64_t episode) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(episode), static_cast<std::uint32_t>(episode >> 32)};
  return Rng(seq);
}

LinkId greedy_action(const std::vector<LinkId>& allowable, const std::function<double(LinkId)>& value) {
  if (allowable.empty()) throw std::invalid_argument("no allowable action");
  LinkId best = allowable.front();
  double best_value = value(best);
  for (std::size_t i = 1; i < allowable.size(); ++i) {
    const double v = value(allowable[i]);
    if (v > best_value || (v == best_value && allowable[i] < best)) {
      best = allowable[i];
      best_value = v;
    }
  }
  return best;
}

LinkId epsilon_greedy(const std::vector<LinkId>& allowable, const std::function<double(LinkId)>& value, double epsilon,
                      Rng& rng) {
  if (allowable.empty()) throw std::invalid_argument("no allowable action");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (epsilon > 0.0 && coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, allowable.size() - 1);
    return allowable[pick(rng)];
  }
  return greedy_action(allowable, value);
}

double TabularQ::value(const Observation& o, LinkId a) const {
  const auto it = values_.find({o, a});
  return it == values_.end() ? 0.0 : it->second;
}

double TabularQ::best(const Observation& o, const std::vector<LinkId>& actions) const {
  if (actions.empty()) return 0.0;
  double b = -std::numeric_limits<double>::infinity();
  for (LinkId a : actions) b = std::max(b, value(o, a));
  return b;
}

double TabularQ::update(const Observation& o, LinkId a, double reward, const Observation& next,
                        const std::vector<LinkId>& next_actions, bool terminal, double eta) {
  const double bootstrap = terminal ? 0.0 : best(next, next_actions);
  double& q = values_[{o, a}];
  q += eta * (reward + bootstrap - q);
  return q;
}

TabularResult train_tabular(const Experiment& experiment, const TabularConfig& config) {
  Environment env(experiment);
  TabularResult result;
  auto epsilon_at = [&](int e) {
    const double span = std::max(1.0, config.decay_fraction * config.episodes);
    const double frac = e / span;
    if (frac >= 1.0) return config.epsilon_end;
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
  };
  for (int e = 0; e < config.episodes; ++e) {
    Rng rng = episode_rng(config.seed, static_cast<std::uint64_t>(e));
    const double eps = epsilon_at(e);
    const EpisodeResult ep = run_episode(env, [&](const Environment&, VehicleId, const Observation& o,
                                                  const std::vector<LinkId>& actions) {
      return epsilon_greedy(actions, [&](LinkId a) { return result.q.value(o, a); }, eps, rng);
    });
    // Backward sweep so values propagate along the whole trajectory in one episode.
    for (auto it = ep.experiences.rbegin(); it != ep.experiences.rend(); ++it) {
      result.q.update(it->observation, it->action, it->reward, it->next, it->next_actions, it->terminal,
                      config.learning_rate);
    }
  }
  result.greedy = run_episode(env, [&](const Environment&, VehicleId, const Observation& o,
                                       const std::vector<LinkId>& actions) {
    return greedy_action(actions, [&](LinkId a) { return result.q.value(o, a); });
  });
  if (!env.agents().empty()) {
    const auto& first = env.loader().vehicle(env.agents().front());
    result.route.push_back(first.origin);
    for (const Decision& d : result.greedy.decisions.front()) result.route.push_back(env.network().link(d.action).head);
  }
  return result;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Experience e) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(e));
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t k, Rng& rng) const {
  const std::size_t n = items_.size();
  k = std::min(k, n);
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t j = n - k; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng);
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
      chosen.push_back(t);
    } else {
      chosen.push_back(j);
    }
  }
  return chosen;
}

namespace {

template <typename T>
T option_or(const std::map<std::string, std::string>& options, const std::string& key, T fallback) {
  const auto it = options.find(key);
  if (it == options.end()) return fallback;
  try {
    std::size_t used = 0;
    T value{};
    if constexpr (std::is_same_v<T, double>) {
      value = std::stod(it->second, &used);
    } else if constexpr (std::is_same_v<T, bool>) {
      if (it->second == "true" || it->second == "1") return true;
      if (it->second == "false" || it->second == "0") return false;
      throw std::invalid_argument(it->second);
    } else {
      value = static_cast<T>(std::stoll(it->second, &used));
    }
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return value;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("option {} has invalid value '{}'", key, it->second));
  }
}

}  // namespace

LearnerConfig LearnerConfig::from_options(const std::map<std::string, std::string>& options, std::uint64_t seed) {
  LearnerConfig c;
  c.seed = seed;
  c.episodes = option_or(options, "episodes", c.episodes);
  c.epsilon_start = option_or(options, "epsilon_start", c.epsilon_start);
  c.epsilon_end = option_or(options, "epsilon_end", c.epsilon_end);
  c.epsilon_decay_fraction = option_or(options, "epsilon_decay_fraction", c.epsilon_decay_fraction);
  c.learning_rate = option_or(options, "learning_rate", c.learning_rate);
  c.learning_rate_decay = option_or(options, "learning_rate_decay", c.learning_rate_decay);
  c.learning_rate_floor = option_or(options, "learning_rate_floor", c.learning_rate_floor);
  c.buffer_capacity = option_or(options, "buffer", c.buffer_capacity);
  c.batch_size = option_or(options, "batch", c.batch_size);
  c.updates_per_episode = option_or(options, "updates", c.updates_per_episode);
  c.target_period = option_or(options, "tau", c.target_period);
  c.convergence_window = option_or(options, "convergence_window", c.convergence_window);
  c.convergence_patience = option_or(options, "convergence_patience", c.convergence_patience);
  c.convergence_tolerance = option_or(options, "convergence_tolerance", c.convergence_tolerance);
  c.stop_at_convergence = option_or(options, "stop_at_convergence", c.stop_at_convergence);
  c.parallel_rollouts = option_or(options, "parallel_rollouts", c.parallel_rollouts);
  if (const auto it = options.find("optimizer"); it != options.end()) {
    if (it->second == "sgd") {
      c.optimizer = OptimizerKind::Sgd;
    } else if (it->second == "adam") {
      c.optimizer = OptimizerKind::Adam;
    } else {
      throw ConfigError(fmt::format("unknown optimizer '{}'", it->second));
    }
  }
  if (const auto it = options.find("hidden"); it != options.end()) {
    c.hidden.clear();
    std::stringstream in(it->second);
    std::string part;
    while (std::getline(in, part, ',')) {
      try {
        c.hidden.push_back(std::stoi(part));
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("option hidden has invalid value '{}'", it->second));
      }
    }
  }
  if (c.episodes < 0 || c.batch_size == 0 || c.target_period <= 0 || c.parallel_rollouts <= 0 ||
      !(c.learning_rate > 0.0)) {
    throw ConfigError("learner options out of range");
  }
  return c;
}

double LearnerConfig::epsilon_at(int episode) const noexcept {
  const double span = std::max(1.0, epsilon_decay_fraction * episodes);
  const double frac = episode / span;
  if (frac >= 1.0) return epsilon_end;
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

double LearnerConfig::learning_rate_at(int episode) const noexcept {
  return std::max(learning_rate_floor, learning_rate * std::pow(learning_rate_decay, episode));
}

QGroup::QGroup(const QEncoder& encoder, const std::vector<int>& hidden, int horizon, std::uint64_t seed)
    : encoder_(&encoder), scale_(std::max(1, horizon)) {
  std::vector<int> widths{encoder.width()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  live_ = Mlp::random(widths, seed);
  target_ = live_;
  adam_ = AdamState(live_);
}

double QGroup::value(const Observation& o, LinkId a, double mean_action) const {
  return scale_ * live_.forward(encoder_->encode(o.node, o.time, a, mean_action));
}

double QGroup::target_value(const Observation& o, LinkId a, double mean_action) const {
  return scale_ * target_.forward(encoder_->encode(o.node, o.time, a, mean_action));
}

double QGroup::td_target(const Experience& e) const {
  if (e.terminal || e.next_actions.empty()) return e.reward;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < e.next_actions.size(); ++i) {
    best = std::max(best, target_value(e.next, e.next_actions[i], e.next_mean_actions.at(i)));
  }
  return e.reward + best;
}

double QGroup::train(const std::vector<const Experience*>& batch, double learning_rate, OptimizerKind optimizer) {
  std::vector<Sample> samples;
  samples.reserve(batch.size());
  for (const Experience* e : batch) {
    samples.push_back({encoder_->encode(e->observation.node, e->observation.time, e->action, e->mean_action),
                       td_target(*e) / scale_});
  }
  return optimizer == OptimizerKind::Adam ? adam_.step(live_, samples, learning_rate)
                                          : live_.sgd_step(samples, learning_rate);
}

std::optional<LinkId> PolicyTable::lookup(std::size_t agent_slot, const Observation& o) const {
  const auto& dict = entries.at(agent_slot);
  const auto it = dict.find(o);
  if (it == dict.end()) return std::nullopt;
  return it->second;
}

std::string PolicyTable::to_text() const {
  std::string out;
  for (std::size_t k = 0; k < agents.size(); ++k) {
    for (const auto& [o, a] : entries[k]) {
      out += fmt::format("agent={} node={} time={} link={}\n", agents[k], o.node.value, o.time, a.value);
    }
  }
  return out;
}

PolicyTable PolicyTable::from_text(const std::string& text) {
  PolicyTable table;
  std::map<VehicleId, std::size_t> slots;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line.front() == '#') continue;
    int agent = 0;
    int node = 0;
    int time = 0;
    int link = 0;
    if (std::sscanf(line.c_str(), "agent=%d node=%d time=%d link=%d", &agent, &node, &time, &link) != 4) {
      throw ConfigError(fmt::format("policy line {}: expected 'agent= node= time= link='", number));
    }
    auto [it, fresh] = slots.emplace(agent, table.agents.size());
    if (fresh) {
      table.agents.push_back(agent);
      table.entries.emplace_back();
    }
    table.entries[it->second][Observation{NodeId{node}, time}] = LinkId{link};
  }
  return table;
}

PolicyTable extract_policy(const Environment& env, const EpisodeResult& episode) {
  PolicyTable table;
  table.agents = env.agents();
  table.entries.resize(table.agents.size());
  for (std::size_t k = 0; k < table.agents.size() && k < episode.decisions.size(); ++k) {
    for (const Decision& d : episode.decisions[k]) table.entries[k][d.observation] = d.action;
  }
  return table;
}

namespace {

ActionSelector greedy_selector(const std::vector<QGroup>& groups, double epsilon, Rng* rng) {
  return [&groups, epsilon, rng](const Environment& env, VehicleId agent, const Observation& o,
                                 const std::vector<LinkId>& actions) {
    const QGroup& g = groups[static_cast<std::size_t>(env.group(agent))];
    auto value = [&](LinkId a) { return g.value(o, a, env.mean_action_estimate(a)); };
    return rng ? epsilon_greedy(actions, value, epsilon, *rng) : greedy_action(actions, value);
  };
}

bool rolling_converged(const std::vector<EpisodeTrace>& trace, const LearnerConfig& c, int& streak) {
  const int w = std::max(1, c.convergence_window);
  const int n = static_cast<int>(trace.size());
  if (n < w + 1) return false;
  auto mean_ending = [&](int end) {
    double s = 0.0;
    for (int i = end - w; i < end; ++i) s += trace[static_cast<std::size_t>(i)].average_travel_time;
    return s / w;
  };
  const double now = mean_ending(n);
  const double before = mean_ending(n - 1);
  const bool settled = trace.back().epsilon <= c.epsilon_end + 1e-12;
  const double rel = before != 0.0 ? std::abs(now - before) / std::abs(before) : std::abs(now - before);
  streak = (settled && rel < c.convergence_tolerance) ? streak + 1 : 0;
  return streak >= c.convergence_patience;
}

}  // namespace

TrainingResult train_mfmadql(const Experiment& experiment, const LearnerConfig& config) {
  TrainingResult result;
  result.experiment = std::make_shared<const Experiment>(experiment);
  Environment prototype(result.experiment);
  result.encoder = std::make_shared<const QEncoder>(result.experiment->network, experiment.settings.horizon,
                                                    prototype.mean_action_scale());
  for (int g = 0; g < prototype.group_count(); ++g) {
    result.groups.emplace_back(*result.encoder, config.hidden, experiment.settings.horizon,
                               config.seed * 7919ULL + static_cast<std::uint64_t>(g));
  }
  std::vector<ReplayBuffer> buffers(result.groups.size(), ReplayBuffer(config.buffer_capacity));
  Rng sampler = episode_rng(config.seed, std::numeric_limits<std::uint64_t>::max());

  const int workers = std::max(1, config.parallel_rollouts);
  std::vector<Environment> envs(static_cast<std::size_t>(workers), prototype);
  int streak = 0;

  for (int first = 0; first < config.episodes && !result.converged; first += workers) {
    const int batch = std::min(workers, config.episodes - first);
    std::vector<EpisodeResult> episodes(static_cast<std::size_t>(batch));
    auto play = [&](int slot) {
      const int e = first + slot;
      Rng rng = episode_rng(config.seed, static_cast<std::uint64_t>(e));
      episodes[static_cast<std::size_t>(slot)] =
          run_episode(envs[static_cast<std::size_t>(slot)], greedy_selector(result.groups, config.epsilon_at(e), &rng));
    };
    if (batch == 1) {
      play(0);
    } else {
      std::vector<std::thread> threads;
      for (int s = 0; s < batch; ++s) threads.emplace_back(play, s);
      for (auto& t : threads) t.join();
    }

    for (int slot = 0; slot < batch; ++slot) {
      const int e = first + slot;
      auto& ep = episodes[static_cast<std::size_t>(slot)];
      for (auto& x : ep.experiences) buffers[static_cast<std::size_t>(x.group)].push(std::move(x));

      const double lr = config.learning_rate_at(e);
      EpisodeTrace row{e, ep.average_travel_time, config.epsilon_at(e), lr, {}};
      for (std::size_t g = 0; g < result.groups.size(); ++g) {
        double total = 0.0;
        int count = 0;
        for (int j = 0; j < config.updates_per_episode && buffers[g].size() > 0; ++j) {
          std::vector<const Experience*> picked;
          for (std::size_t i : buffers[g].sample_indices(config.batch_size, sampler)) picked.push_back(&buffers[g].at(i));
          const double loss = result.groups[g].train(picked, lr, config.optimizer);
          if (!std::isfinite(loss)) {
            throw DivergenceError(fmt::format("training diverged at episode {} in group {}", e, g));
          }
          total += loss;
          ++count;
        }
        row.loss.push_back(count ? total / count : 0.0);
      }
      if ((e + 1) % config.target_period == 0) {
        for (auto& g : result.groups) g.sync_target();
      }
      result.trace.push_back(std::move(row));
      spdlog::debug("episode {} average travel time {:.3f} epsilon {:.3f}", e, result.trace.back().average_travel_time,
                    result.trace.back().epsilon);
      if (rolling_converged(result.trace, config, streak) && result.converged_episode < 0) {
        result.converged_episode = e;
        if (config.stop_at_convergence) {
          result.converged = true;
          break;
        }
      }
    }
  }
  if (result.converged_episode >= 0) result.converged = true;

  result.greedy = run_episode(envs.front(), greedy_selector(result.groups, 0.0, nullptr));
  result.policy = extract_policy(envs.front(), result.greedy);
  return result;
}

ActionSelector policy_selector(const TrainingResult& trained) {
  std::map<VehicleId, std::size_t> slots;
  for (std::size_t k = 0; k < trained.policy.agents.size(); ++k) slots[trained.policy.agents[k]] = k;
  const ActionSelector fallback = greedy_selector(trained.groups, 0.0, nullptr);
  return [&trained, slots, fallback](const Environment& env, VehicleId agent, const Observation& o,
                                     const std::vector<LinkId>& actions) {
    if (const auto it = slots.find(agent); it != slots.end()) {
      if (auto a = trained.policy.lookup(it->second, o); a && std::find(actions.begin(), actions.end(), *a) != actions.end()) {
        return *a;
      }
    }
    return fallback(env, agent, o, actions);
  };
}

DeviationReport unilateral_deviation(const TrainingResult& trained) {
  Environment env(trained.experiment);
  const ActionSelector policy = policy_selector(trained);
  DeviationReport report;
  const EpisodeResult base = run_episode(env, policy);
  report.returns = base.returns;
  const auto& agents = env.agents();
  report.deviation_returns.assign(agents.size(), -std::numeric_limits<double>::infinity());
  report.deviation_actions.assign(agents.size(), LinkId{});

  for (std::size_t k = 0; k < agents.size(); ++k) {
    if (base.decisions[k].empty()) continue;
    const Decision first = base.decisions[k].front();
    for (LinkId alt : env.network().outbound_links(first.observation.node)) {
      if (alt == first.action) continue;
      bool used = false;
      const EpisodeResult dev = run_episode(env, [&](const Environment& e, VehicleId agent, const Observation& o,
                                                     const std::vector<LinkId>& actions) {
        if (agent == agents[k] && !used) {
          used = true;
          return alt;
        }
        return policy(e, agent, o, actions);
      });
      if (dev.returns[k] > report.deviation_returns[k]) {
        report.deviation_returns[k] = dev.returns[k];
        report.deviation_actions[k] = alt;
      }
    }
  }
  return report;
}

}  // namespace mrg
