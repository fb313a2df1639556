#include "mrg/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>

#include <fmt/format.h>

namespace mrg {
namespace {

double link_time(const Link& link) {
  if (link.delay_base) return *link.delay_base + link.delay_slope;
  if (link.free_flow_speed > 0.0) return link.length / link.free_flow_speed;
  return link.delay_slope;
}

struct Candidate {
  double cost;
  Route route;
  bool operator<(const Candidate& o) const {
    if (cost != o.cost) return cost < o.cost;
    return std::lexicographical_compare(route.begin(), route.end(), o.route.begin(), o.route.end());
  }
};

std::optional<Route> shortest(const Network& net, NodeId from, NodeId to, const std::set<LinkId>& banned_links,
                              const std::set<NodeId>& banned_nodes) {
  const std::size_t n = net.nodes().size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::optional<LinkId>> via(n);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[net.node_index(from)] = 0.0;
  heap.emplace(0.0, from.value);
  while (!heap.empty()) {
    const auto [d, id] = heap.top();
    heap.pop();
    const NodeId u{id};
    if (d > dist[net.node_index(u)]) continue;
    if (u == to) break;
    for (LinkId l : net.outbound_links(u)) {
      const Link& link = net.link(l);
      if (banned_links.contains(l) || banned_nodes.contains(link.head)) continue;
      const std::size_t v = net.node_index(link.head);
      const double nd = d + link_time(link);
      if (nd < dist[v]) {
        dist[v] = nd;
        via[v] = l;
        heap.emplace(nd, link.head.value);
      }
    }
  }
  if (!std::isfinite(dist[net.node_index(to)])) return std::nullopt;
  Route route;
  for (NodeId cur = to; cur != from;) {
    const LinkId l = *via[net.node_index(cur)];
    route.push_back(l);
    cur = net.link(l).tail;
  }
  std::reverse(route.begin(), route.end());
  return route;
}

double route_time(const Network& net, const Route& r) {
  double t = 0.0;
  for (LinkId l : r) t += link_time(net.link(l));
  return t;
}

}  // namespace

double free_flow_time(const Network& network, const Route& route) { return route_time(network, route); }

std::vector<Route> enumerate_routes(const Network& network, NodeId origin, NodeId destination, std::size_t max_routes) {
  std::vector<Route> found;
  if (max_routes == 0) return found;
  auto first = shortest(network, origin, destination, {}, {});
  if (!first) {
    throw ConfigError(fmt::format("no route from node {} to node {}", origin.value, destination.value));
  }
  found.push_back(*first);
  std::set<Candidate> pool;
  while (found.size() < max_routes) {
    const Route& last = found.back();
    NodeId spur = origin;
    for (std::size_t i = 0; i < last.size(); ++i) {
      const Route root(last.begin(), last.begin() + static_cast<std::ptrdiff_t>(i));
      std::set<LinkId> banned_links;
      for (const Route& r : found) {
        if (r.size() > i && std::equal(root.begin(), root.end(), r.begin())) banned_links.insert(r[i]);
      }
      std::set<NodeId> banned_nodes{origin};
      for (LinkId l : root) banned_nodes.insert(network.link(l).head);
      banned_nodes.erase(spur);
      if (auto tail = shortest(network, spur, destination, banned_links, banned_nodes)) {
        Route candidate = root;
        candidate.insert(candidate.end(), tail->begin(), tail->end());
        pool.insert({route_time(network, candidate), candidate});
      }
      spur = network.link(last[i]).head;
    }
    while (!pool.empty() && std::find(found.begin(), found.end(), pool.begin()->route) != found.end()) {
      pool.erase(pool.begin());
    }
    if (pool.empty()) break;
    found.push_back(pool.begin()->route);
    pool.erase(pool.begin());
  }
  std::stable_sort(found.begin(), found.end(), [&](const Route& a, const Route& b) {
    return Candidate{route_time(network, a), a} < Candidate{route_time(network, b), b};
  });
  return found;
}

double gawron_response(double p, double delta, double a) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double denom = 1.0 - delta * delta;
  if (denom <= 0.0) return delta > 0.0 ? 1.0 : 0.0;
  const double g = std::exp(a * delta / denom);
  if (!std::isfinite(g)) return 1.0;
  return p * g / (p * g + (1.0 - p));
}

std::vector<double> gawron_update(const std::vector<double>& proportions, const std::vector<double>& costs, double eta,
                                  double a) {
  if (proportions.size() != costs.size()) throw std::invalid_argument("proportions and costs differ in size");
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in (0, 1]");
  std::vector<double> p = proportions;
  if (p.size() < 2) return p;
  const std::size_t best =
      static_cast<std::size_t>(std::min_element(costs.begin(), costs.end()) - costs.begin());
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k == best) continue;
    const double total_cost = costs[best] + costs[k];
    if (total_cost <= 0.0) throw std::invalid_argument("route costs sum to zero");
    const double pair = p[best] + p[k];
    if (pair <= 0.0) continue;
    const double share = p[best] / pair;
    const double delta = (costs[k] - costs[best]) / total_cost;
    const double updated = (1.0 - eta) * share + eta * gawron_response(share, delta, a);
    p[best] = updated * pair;
    p[k] = (1.0 - updated) * pair;
  }
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x = std::max(0.0, x / sum);
  return p;
}

std::vector<int> apportion(int count, const std::vector<double>& proportions) {
  std::vector<int> out(proportions.size(), 0);
  if (proportions.empty() || count <= 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t k = 0; k < proportions.size(); ++k) {
    const double exact = count * proportions[k];
    out[k] = static_cast<int>(std::floor(exact + 1e-9));
    assigned += out[k];
    remainders.emplace_back(exact - out[k], k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first + 1e-12; });
  for (std::size_t i = 0; assigned < count; i = (i + 1) % remainders.size()) {
    ++out[remainders[i].second];
    ++assigned;
  }
  while (assigned > count) {
    const auto it = std::max_element(out.begin(), out.end());
    --*it;
    --assigned;
  }
  return out;
}

std::vector<std::size_t> interleave(const std::vector<int>& counts) {
  const int total = std::accumulate(counts.begin(), counts.end(), 0);
  std::vector<std::size_t> order;
  order.reserve(static_cast<std::size_t>(std::max(0, total)));
  std::vector<long long> credit(counts.size(), 0);
  for (int i = 0; i < total; ++i) {
    std::size_t pick = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      credit[k] += counts[k];
      if (credit[k] > credit[pick]) pick = k;
    }
    credit[pick] -= total;
    order.push_back(pick);
  }
  return order;
}

BaselineConfig BaselineConfig::from_options(const std::map<std::string, std::string>& options) {
  BaselineConfig c;
  auto read = [&](const char* key, auto& field) {
    const auto it = options.find(key);
    if (it == options.end()) return;
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>) {
        field = std::stod(it->second, &used);
      } else {
        field = static_cast<std::decay_t<decltype(field)>>(std::stoll(it->second, &used));
      }
      if (used != it->second.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("option {} has invalid value '{}'", key, it->second));
    }
  };
  read("gawron_eta", c.eta);
  read("gawron_a", c.a);
  read("tolerance", c.tolerance);
  read("iterations", c.iterations);
  read("max_routes", c.max_routes);
  read("used_threshold", c.used_threshold);
  if (!(c.eta > 0.0 && c.eta <= 1.0) || c.iterations < 0 || c.max_routes == 0) {
    throw ConfigError("baseline options out of range");
  }
  return c;
}

std::vector<DemandClass> demand_classes(const Experiment& experiment, std::size_t max_routes) {
  std::vector<DemandClass> classes;
  std::map<std::pair<NodeId, NodeId>, std::vector<Route>> cache;
  const auto& entries = experiment.demand.entries;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const DemandEntry& e = entries[i];
    if (e.is_background()) continue;
    auto key = std::make_pair(e.origin, e.destination);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, enumerate_routes(experiment.network, e.origin, e.destination, max_routes)).first;
    }
    classes.push_back({i, e.departure, e.origin, e.destination, e.count, it->second});
  }
  return classes;
}

DemandProfile assign_routes(const DemandProfile& demand, const std::vector<DemandClass>& classes,
                            const std::vector<std::vector<int>>& counts) {
  DemandProfile out;
  std::size_t c = 0;
  for (std::size_t i = 0; i < demand.entries.size(); ++i) {
    const DemandEntry& e = demand.entries[i];
    if (e.is_background()) {
      out.entries.push_back(e);
      continue;
    }
    if (c >= classes.size() || classes[c].entry != i) throw std::invalid_argument("demand classes do not match demand");
    for (std::size_t k : interleave(counts[c])) {
      DemandEntry single = e;
      single.count = 1;
      single.route = classes[c].routes[k];
      out.entries.push_back(std::move(single));
    }
    ++c;
  }
  return out;
}

namespace {

std::vector<double> simulate_travel_times(const Experiment& experiment, const DemandProfile& demand) {
  Loader loader(experiment.network, demand, experiment.settings.model, experiment.settings.discipline);
  const int horizon = experiment.settings.horizon;
  while (!loader.finished() && loader.clock() < horizon) loader.step();
  std::vector<double> times;
  times.reserve(loader.vehicles().size());
  for (const auto& v : loader.vehicles()) {
    times.push_back(static_cast<double>((v.status == VehicleStatus::Arrived ? v.arrival_step : horizon) - v.departure));
  }
  return times;
}

}  // namespace

RouteCosts measure_route_costs(const Experiment& experiment, const std::vector<DemandClass>& classes,
                               const std::vector<std::vector<double>>& proportions) {
  RouteCosts result;
  for (std::size_t c = 0; c < classes.size(); ++c) result.flows.push_back(apportion(classes[c].count, proportions[c]));
  const DemandProfile loaded = assign_routes(experiment.demand, classes, result.flows);
  const std::vector<double> times = simulate_travel_times(experiment, loaded);

  // Vehicle ids follow entry order, so walk the expanded profile alongside the classes.
  result.costs.resize(classes.size());
  std::vector<std::vector<int>> seen(classes.size());
  double total = 0.0;
  int agents = 0;
  std::size_t vehicle = 0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < experiment.demand.entries.size(); ++i) {
    const DemandEntry& e = experiment.demand.entries[i];
    if (e.is_background()) {
      vehicle += static_cast<std::size_t>(e.count);
      continue;
    }
    result.costs[c].assign(classes[c].routes.size(), 0.0);
    seen[c].assign(classes[c].routes.size(), 0);
    for (std::size_t k : interleave(result.flows[c])) {
      result.costs[c][k] += times[vehicle];
      ++seen[c][k];
      total += times[vehicle];
      ++agents;
      ++vehicle;
    }
    ++c;
  }
  result.average_travel_time = agents ? total / agents : 0.0;

  for (std::size_t cc = 0; cc < classes.size(); ++cc) {
    for (std::size_t k = 0; k < classes[cc].routes.size(); ++k) {
      if (seen[cc][k] > 0) {
        result.costs[cc][k] /= seen[cc][k];
        continue;
      }
      DemandProfile probe = loaded;
      DemandEntry extra = experiment.demand.entries[classes[cc].entry];
      extra.count = 1;
      extra.route = classes[cc].routes[k];
      probe.entries.push_back(std::move(extra));
      result.costs[cc][k] = simulate_travel_times(experiment, probe).back();
    }
  }
  return result;
}

double wardrop_gap(const std::vector<std::vector<double>>& costs, const std::vector<std::vector<double>>& proportions,
                   double used_threshold) {
  double gap = 0.0;
  for (std::size_t c = 0; c < costs.size(); ++c) {
    if (costs[c].empty()) continue;
    const double best = *std::min_element(costs[c].begin(), costs[c].end());
    if (best <= 0.0) continue;
    for (std::size_t k = 0; k < costs[c].size(); ++k) {
      if (proportions[c][k] > used_threshold) gap = std::max(gap, (costs[c][k] - best) / best);
    }
  }
  return gap;
}

BaselineResult solve_due_fixed_point(const Experiment& experiment, const BaselineConfig& config) {
  BaselineResult result;
  result.classes = demand_classes(experiment, config.max_routes);
  for (const auto& c : result.classes) {
    result.proportions.emplace_back(c.routes.size(), 1.0 / static_cast<double>(c.routes.size()));
  }
  for (int it = 0; it < std::max(1, config.iterations); ++it) {
    RouteCosts costs = measure_route_costs(experiment, result.classes, result.proportions);
    const double gap = wardrop_gap(costs.costs, result.proportions, config.used_threshold);
    result.trace.push_back({it, costs.costs, costs.flows, result.proportions, costs.average_travel_time, gap});
    result.final_costs = std::move(costs);
    result.iterations = it + 1;
    result.gap = gap;
    if (gap < config.tolerance) {
      result.converged = true;
      break;
    }
    if (it + 1 >= config.iterations) break;
    for (std::size_t c = 0; c < result.classes.size(); ++c) {
      result.proportions[c] = gawron_update(result.proportions[c], result.final_costs.costs[c], config.eta, config.a);
    }
  }
  return result;
}

}  // namespace mrg
