#include "mrg_tools/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mrg/csv.hpp"

namespace mrg::tools {
namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot open '{}'", path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", (dir / name).string()));
  return out;
}

/// Controllable vehicle ids, which keep their ids when routes are fixed.
std::vector<VehicleId> controllable_ids(const DemandProfile& demand) {
  std::vector<VehicleId> ids;
  VehicleId next = 0;
  for (const auto& e : demand.entries) {
    for (int k = 0; k < e.count; ++k, ++next) {
      if (!e.is_background()) ids.push_back(next);
    }
  }
  return ids;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

Experiment load_with_overrides(const CommandOptions& options) {
  Experiment e = load_experiment_file(options.config);
  if (options.model) {
    const auto model = parse_model(*options.model);
    if (!model) throw UsageError(fmt::format("unknown loading model '{}'", *options.model));
    e.settings.model = *model;
  }
  if (options.seed) e.settings.seed = *options.seed;
  if (options.episodes) e.settings.options["episodes"] = std::to_string(*options.episodes);
  if (options.iterations) e.settings.options["iterations"] = std::to_string(*options.iterations);
  if (options.parallel_rollouts) e.settings.options["parallel_rollouts"] = std::to_string(*options.parallel_rollouts);
  validate_model_parameters(e.network, e.settings.model);
  return e;
}

std::vector<int> route_split(const Environment& env, const EpisodeResult& episode, const DemandClass& cls) {
  std::vector<int> split(cls.routes.size() + 1, 0);
  const auto& agents = env.agents();
  for (std::size_t k = 0; k < agents.size(); ++k) {
    const auto& v = env.loader().vehicle(agents[k]);
    if (v.origin != cls.origin || v.destination != cls.destination || v.departure != cls.departure) continue;
    Route path;
    for (const Decision& d : episode.decisions[k]) path.push_back(d.action);
    const auto it = std::find(cls.routes.begin(), cls.routes.end(), path);
    ++split[static_cast<std::size_t>(it - cls.routes.begin())];
  }
  return split;
}

int cmd_simulate(const CommandOptions& options) {
  if (options.policy && options.proportions) throw UsageError("give at most one of --policy and --proportions");
  const Experiment experiment = load_with_overrides(options);
  const fs::path out_dir(options.out);
  const int horizon = experiment.settings.horizon;

  if (options.policy) {
    const PolicyTable table = PolicyTable::from_text(read_file(*options.policy));
    std::map<VehicleId, std::size_t> slots;
    for (std::size_t k = 0; k < table.agents.size(); ++k) slots[table.agents[k]] = k;
    Environment env(experiment);
    env.enable_trace(true);
    const EpisodeResult episode = run_episode(env, [&](const Environment& e, VehicleId agent, const Observation& o,
                                                       const std::vector<LinkId>& actions) {
      if (const auto it = slots.find(agent); it != slots.end()) {
        if (auto a = table.lookup(it->second, o); a && std::find(actions.begin(), actions.end(), *a) != actions.end()) {
          return *a;
        }
      }
      const auto& v = e.loader().vehicle(agent);
      return enumerate_routes(e.network(), o.node, v.destination, 1).front().front();
    });
    auto trace = open_output(out_dir, "link_trace.csv");
    write_link_trace(trace, env.loader().trace());
    auto times = open_output(out_dir, "travel_times.csv");
    write_travel_times(times, env.loader(), env.agents(), horizon);
    spdlog::info("simulated {} agents, average travel time {:.4f}", env.agents().size(), episode.average_travel_time);
    return 0;
  }

  const auto classes = demand_classes(experiment, BaselineConfig::from_options(experiment.settings.options).max_routes);
  std::vector<std::vector<double>> proportions;
  if (options.proportions) {
    proportions = read_proportions(read_file(*options.proportions), classes);
  } else {
    for (const auto& c : classes) {
      std::vector<double> p(c.routes.size(), 0.0);
      p.front() = 1.0;
      proportions.push_back(std::move(p));
    }
  }
  std::vector<std::vector<int>> counts;
  for (std::size_t c = 0; c < classes.size(); ++c) counts.push_back(apportion(classes[c].count, proportions[c]));
  const DemandProfile fixed = assign_routes(experiment.demand, classes, counts);
  Loader loader(experiment.network, fixed, experiment.settings.model, experiment.settings.discipline);
  loader.enable_trace(true);
  while (!loader.finished() && loader.clock() < horizon) loader.step();

  auto trace = open_output(out_dir, "link_trace.csv");
  write_link_trace(trace, loader.trace());
  auto times = open_output(out_dir, "travel_times.csv");
  const auto agents = controllable_ids(experiment.demand);
  write_travel_times(times, loader, agents, horizon);
  spdlog::info("simulated {} vehicles over {} steps", loader.vehicles().size(), loader.clock());
  return 0;
}

int cmd_train(const CommandOptions& options) {
  const Experiment experiment = load_with_overrides(options);
  const LearnerConfig config = LearnerConfig::from_options(experiment.settings.options, experiment.settings.seed);
  const TrainingResult trained = train_mfmadql(experiment, config);
  const fs::path out_dir(options.out);

  auto trace = open_output(out_dir, "training.csv");
  write_training_trace(trace, trained.trace, static_cast<int>(trained.groups.size()));
  auto policy = open_output(out_dir, "policy.txt");
  policy << trained.policy.to_text();

  Environment env(trained.experiment);
  run_episode(env, policy_selector(trained));
  auto times = open_output(out_dir, "travel_times.csv");
  write_travel_times(times, env.loader(), env.agents(), experiment.settings.horizon);

  if (trained.converged) {
    spdlog::info("converged at episode {}", trained.converged_episode);
  } else {
    spdlog::warn("no convergence within {} episodes", config.episodes);
  }
  spdlog::info("greedy average travel time {:.4f}", trained.greedy.average_travel_time);
  return 0;
}

int cmd_baseline(const CommandOptions& options) {
  const Experiment experiment = load_with_overrides(options);
  const BaselineConfig config = BaselineConfig::from_options(experiment.settings.options);
  const BaselineResult result = solve_due_fixed_point(experiment, config);
  const fs::path out_dir(options.out);
  auto trace = open_output(out_dir, "baseline_iterations.csv");
  write_baseline_trace(trace, result);
  auto props = open_output(out_dir, "proportions.csv");
  write_proportions(props, result);
  spdlog::info("average travel time {:.4f} after {} iterations, gap {:.4f}", result.final_costs.average_travel_time,
               result.iterations, result.gap);
  if (!result.converged) {
    spdlog::error("no fixed point within {} iterations (final gap {:.4f})", config.iterations, result.gap);
    return 1;
  }
  return 0;
}

int cmd_compare(const CommandOptions& options) {
  const Experiment experiment = load_with_overrides(options);
  const fs::path out_dir(options.out);

  const auto t0 = std::chrono::steady_clock::now();
  const BaselineResult baseline = solve_due_fixed_point(experiment, BaselineConfig::from_options(experiment.settings.options));
  const double baseline_seconds = seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  const LearnerConfig config = LearnerConfig::from_options(experiment.settings.options, experiment.settings.seed);
  const TrainingResult trained = train_mfmadql(experiment, config);
  const double marl_seconds = seconds_since(t1);

  Environment env(trained.experiment);
  const EpisodeResult greedy = run_episode(env, policy_selector(trained));

  const double base_cost = baseline.final_costs.average_travel_time;
  const double marl_cost = greedy.average_travel_time;
  const double gap = std::abs(marl_cost - base_cost);
  const double rel = base_cost != 0.0 ? gap / base_cost : 0.0;

  auto csv = open_output(out_dir, "compare.csv");
  csv << "metric,value\n";
  csv << "baseline_average_travel_time," << csv_number(base_cost) << '\n';
  csv << "marl_average_travel_time," << csv_number(marl_cost) << '\n';
  csv << "absolute_gap," << csv_number(gap) << '\n';
  csv << "relative_gap," << csv_number(rel) << '\n';
  csv << "baseline_converged," << (baseline.converged ? 1 : 0) << '\n';
  csv << "baseline_iterations," << baseline.iterations << '\n';
  csv << "marl_converged_episode," << trained.converged_episode << '\n';
  csv << "marl_episodes," << trained.trace.size() << '\n';
  for (std::size_t c = 0; c < baseline.classes.size(); ++c) {
    const auto split = route_split(env, greedy, baseline.classes[c]);
    for (std::size_t k = 0; k < baseline.classes[c].routes.size(); ++k) {
      csv << fmt::format("class{}_route{}_baseline_flow,{}\n", c, k, baseline.final_costs.flows[c][k]);
      csv << fmt::format("class{}_route{}_marl_flow,{}\n", c, k, split[k]);
    }
    csv << fmt::format("class{}_other_marl_flow,{}\n", c, split.back());
  }

  auto report = open_output(out_dir, "compare_report.txt");
  report << fmt::format("baseline average travel time  {:.4f}  ({} iterations, {})\n", base_cost, baseline.iterations,
                        baseline.converged ? "converged" : "not converged");
  report << fmt::format("MARL average travel time      {:.4f}  ({} episodes, {})\n", marl_cost, trained.trace.size(),
                        trained.converged ? "converged" : "not converged");
  report << fmt::format("gap                           {:.4f}  ({:.2f}%)\n", gap, 100.0 * rel);
  report << fmt::format("baseline wall-clock           {:.2f} s\n", baseline_seconds);
  report << fmt::format("MARL wall-clock               {:.2f} s\n", marl_seconds);
  spdlog::info("baseline {:.4f}, MARL {:.4f}, relative gap {:.2f}%", base_cost, marl_cost, 100.0 * rel);
  return 0;
}

}  // namespace mrg::tools
