#pragma once

/// @file baseline.hpp
/// @brief Iterative fixed-point solver for dynamic user equilibrium.
///
/// Each demand class (controllable demand entry) splits over a fixed set of
/// routes. Every iteration loads the network with the current split, measures
/// the mean travel time per route and moves proportions toward cheaper routes
/// with the Gawron update.

#include <cstdint>
#include <map>
#include <vector>

#include "mrg/dnl.hpp"
#include "mrg/network.hpp"

namespace mrg {

using Route = std::vector<LinkId>;

/// Free-flow traversal time of a route in steps.
[[nodiscard]] double free_flow_time(const Network& network, const Route& route);

/// Up to `max_routes` loop-free routes from origin to destination ordered by
/// free-flow time, ties broken by link sequence (Yen's algorithm).
[[nodiscard]] std::vector<Route> enumerate_routes(const Network& network, NodeId origin, NodeId destination,
                                                  std::size_t max_routes);

/// Two-route response f(p, delta) = p g / (p g + 1 - p), g = exp(a delta / (1 - delta^2)).
[[nodiscard]] double gawron_response(double p, double delta, double a);

/// Moves proportions toward cheaper routes. Each route is paired with the
/// currently cheapest route and their shares are updated within the pair;
/// the result is renormalized.
[[nodiscard]] std::vector<double> gawron_update(const std::vector<double>& proportions, const std::vector<double>& costs,
                                                double eta, double a);

/// Integer split of `count` vehicles by largest remainders, ties to the lowest index.
[[nodiscard]] std::vector<int> apportion(int count, const std::vector<double>& proportions);

/// Route of each of `count` vehicles, interleaving routes smoothly by weight.
[[nodiscard]] std::vector<std::size_t> interleave(const std::vector<int>& counts);

struct DemandClass {
  std::size_t entry{0};  // index into DemandProfile::entries
  int departure{0};
  NodeId origin;
  NodeId destination;
  int count{0};
  std::vector<Route> routes;
};

struct RouteCosts {
  /// costs[c][k]: mean travel time of class c on route k.
  std::vector<std::vector<double>> costs;
  std::vector<std::vector<int>> flows;
  /// Mean over all controllable vehicles.
  double average_travel_time{0.0};
};

struct BaselineConfig {
  double eta{0.3};
  double a{1.0};
  double tolerance{0.01};
  int iterations{200};
  std::size_t max_routes{4};
  double used_threshold{0.01};

  static BaselineConfig from_options(const std::map<std::string, std::string>& options);
};

[[nodiscard]] std::vector<DemandClass> demand_classes(const Experiment& experiment, std::size_t max_routes);

/// Loads the network with the given split. Routes that receive no vehicle are
/// costed by a single probe vehicle simulated on top of the loaded network.
[[nodiscard]] RouteCosts measure_route_costs(const Experiment& experiment, const std::vector<DemandClass>& classes,
                                             const std::vector<std::vector<double>>& proportions);

struct BaselineIteration {
  int iteration{0};
  std::vector<std::vector<double>> costs;
  std::vector<std::vector<int>> flows;
  std::vector<std::vector<double>> proportions;
  double average_travel_time{0.0};
  double gap{0.0};
};

struct BaselineResult {
  std::vector<DemandClass> classes;
  std::vector<std::vector<double>> proportions;
  RouteCosts final_costs;
  std::vector<BaselineIteration> trace;
  bool converged{false};
  int iterations{0};
  double gap{0.0};
};

/// Relative Wardrop gap: largest (cost - min cost) / min cost over routes
/// whose proportion exceeds `used_threshold`.
[[nodiscard]] double wardrop_gap(const std::vector<std::vector<double>>& costs,
                                 const std::vector<std::vector<double>>& proportions, double used_threshold);

[[nodiscard]] BaselineResult solve_due_fixed_point(const Experiment& experiment, const BaselineConfig& config);

/// Expands controllable demand into one fixed-route vehicle per entry, in
/// vehicle-id order, so a plain Loader can replay a route assignment.
[[nodiscard]] DemandProfile assign_routes(const DemandProfile& demand, const std::vector<DemandClass>& classes,
                                          const std::vector<std::vector<int>>& counts);

}  // namespace mrg
