#pragma once

// Random scenario generators and invariant checks for the loading models,
// shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mrg/dnl.hpp"

namespace mrg::test {

inline constexpr int kPropertyCases = 1000;
inline constexpr int kPropertyHorizon = 400;

struct Scenario {
  Network network;
  DemandProfile demand;
  int vehicles{0};
};

inline Link physical(int id, int tail, int head, std::mt19937_64& rng) {
  auto pick = [&](std::initializer_list<double> xs) {
    std::uniform_int_distribution<std::size_t> d(0, xs.size() - 1);
    return *(xs.begin() + static_cast<std::ptrdiff_t>(d(rng)));
  };
  Link l;
  l.id = LinkId{id};
  l.tail = NodeId{tail};
  l.head = NodeId{head};
  l.length = pick({0.2, 0.4, 0.6});
  l.free_flow_speed = 0.2;
  l.backward_speed = pick({0.1, 0.2});
  l.jam_density = pick({10.0, 20.0, 50.0});
  const double q = pick({1.0, 2.0, 3.0});
  if (std::bernoulli_distribution(0.25)(rng)) {
    l.flow_capacity.add_piece(0, q);
    l.flow_capacity.add_piece(std::uniform_int_distribution<int>(1, 10)(rng), pick({1.0, 2.0}));
  } else {
    l.flow_capacity = CapacitySchedule(q);
  }
  return l;
}

/// Random acyclic network on nodes 1..n with a guaranteed chain 1 -> 2 -> ... -> n,
/// one origin at node 1, one destination at node n, and vehicles on random
/// fixed routes.
inline Scenario random_scenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = std::uniform_int_distribution<int>(2, 8)(rng);
  std::vector<Node> nodes{{NodeId{0}, "O"}, {NodeId{100}, "D"}};
  for (int i = 1; i <= n; ++i) nodes.push_back({NodeId{i}, ""});

  std::vector<Link> links;
  Link origin;
  origin.id = LinkId{0};
  origin.tail = NodeId{0};
  origin.head = NodeId{1};
  origin.dummy = DummyKind::Origin;
  if (std::bernoulli_distribution(0.3)(rng)) origin.flow_capacity = CapacitySchedule(2.0);
  links.push_back(origin);
  Link sink;
  sink.id = LinkId{1};
  sink.tail = NodeId{n};
  sink.head = NodeId{100};
  sink.dummy = DummyKind::Sink;
  links.push_back(sink);

  int next_id = 2;
  std::map<int, std::vector<LinkId>> out;
  for (int i = 1; i < n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      const int copies = j == i + 1 ? 1 + (std::bernoulli_distribution(0.3)(rng) ? 1 : 0)
                                    : (std::bernoulli_distribution(0.3)(rng) ? 1 : 0);
      for (int c = 0; c < copies; ++c) {
        links.push_back(physical(next_id, i, j, rng));
        out[i].push_back(LinkId{next_id});
        ++next_id;
      }
    }
  }

  Scenario s;
  s.network = Network::build(nodes, links);
  const int vehicles = std::uniform_int_distribution<int>(0, 20)(rng);
  for (int k = 0; k < vehicles; ++k) {
    DemandEntry e;
    e.departure = std::uniform_int_distribution<int>(0, 5)(rng);
    e.origin = NodeId{1};
    e.destination = NodeId{n};
    e.count = 1;
    int at = 1;
    while (at != n) {
      const auto& choices = out[at];
      const LinkId l = choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
      e.route.push_back(l);
      at = s.network.link(l).head.value;
    }
    s.demand.entries.push_back(e);
  }
  s.vehicles = vehicles;
  return s;
}

struct Observed {
  std::map<int, std::vector<VehicleId>> entered;  // by link, in entry order
  std::map<int, std::vector<VehicleId>> exited;   // by link, in exit order
};

inline std::string check_invariants(const Scenario& s, LoadingModel model, NodeDiscipline discipline) {
  Loader loader(s.network, s.demand, model, discipline);
  const auto& links = s.network.links();
  Observed seen;
  std::map<std::pair<VehicleId, int>, int> hop;  // (vehicle, link) -> following link

  while (!loader.finished() && loader.clock() < kPropertyHorizon) {
    const int t = loader.clock();
    const StepResult r = loader.step();
    std::map<int, long long> in_count;
    std::map<int, long long> out_count;
    for (const TransitFlow& f : r.flows) {
      for (VehicleId v : f.vehicles) {
        seen.exited[f.from_link.value].push_back(v);
        seen.entered[f.to_link.value].push_back(v);
        hop[{v, f.from_link.value}] = f.to_link.value;
        ++out_count[f.from_link.value];
        ++in_count[f.to_link.value];
      }
    }
    for (const Link& l : links) {
      const LinkState& st = loader.state(l.id);
      const std::size_t k = st.n_up.size() - 1;
      if (st.n_up[k] < st.n_up[k - 1] || st.n_down[k] < st.n_down[k - 1]) return "cumulative count decreased";
      if (st.n_down[k] > st.n_up[k]) return "more vehicles left a link than entered it";
      if (l.is_dummy()) continue;
      const long long q = capacity_per_step(l.flow_capacity.at(t));
      if (in_count[l.id.value] > q) return "inflow above capacity on link " + std::to_string(l.id.value);
      if (out_count[l.id.value] > q) return "outflow above capacity on link " + std::to_string(l.id.value);
      if (model != LoadingModel::PointQueue && st.occupancy() > storage_capacity(l)) {
        return "occupancy above storage on link " + std::to_string(l.id.value);
      }
    }
    long long total = 0;
    for (const Link& l : links) {
      const LinkState& st = loader.state(l.id);
      total += l.dummy == DummyKind::Sink ? st.n_up.back() : st.occupancy();
    }
    if (total != s.vehicles) return "vehicle count not conserved";
    for (const Node& node : s.network.nodes()) {
      long long in = 0;
      long long out = 0;
      for (LinkId l : s.network.inbound_priority(node.id)) in += loader.state(l).n_down.back();
      for (const Link& l : links) {
        if (l.tail == node.id) out += loader.state(l.id).n_up.back();
      }
      if (!s.network.inbound_priority(node.id).empty() && in != out) return "node flow not conserved";
    }
  }
  if (!loader.finished()) return "network did not drain";
  if (loader.arrived() != s.vehicles) return "arrivals differ from demand";

  for (const Link& l : links) {
    if (l.dummy == DummyKind::Sink) continue;
    const auto& in = l.is_dummy() ? std::vector<VehicleId>{} : seen.entered[l.id.value];
    const auto& out = seen.exited[l.id.value];
    if (!l.is_dummy() && in.size() != out.size()) return "link did not empty";
    if (discipline == NodeDiscipline::Fifo || l.is_dummy()) {
      if (!l.is_dummy() && in != out) return "FIFO violated on link " + std::to_string(l.id.value);
      continue;
    }
    // Per turning movement: vehicles bound for the same next link keep their order.
    std::map<int, std::vector<VehicleId>> by_in;
    std::map<int, std::vector<VehicleId>> by_out;
    for (VehicleId v : in) by_in[hop.at({v, l.id.value})].push_back(v);
    for (VehicleId v : out) by_out[hop.at({v, l.id.value})].push_back(v);
    if (by_in != by_out) return "movement FIFO violated on link " + std::to_string(l.id.value);
  }
  // Dummy origins release in departure order, then id order.
  std::vector<VehicleId> released = seen.exited[0];
  std::vector<VehicleId> expected = released;
  std::stable_sort(expected.begin(), expected.end(), [&](VehicleId a, VehicleId b) {
    return loader.vehicle(a).departure != loader.vehicle(b).departure
               ? loader.vehicle(a).departure < loader.vehicle(b).departure
               : a < b;
  });
  if (released != expected) return "origin release order wrong";
  for (const auto& v : loader.vehicles()) {
    if (v.arrival_step < v.departure) return "arrival before departure";
  }
  return {};
}

/// Cumulative counts of origin -> link a -> link b -> sink computed straight
/// from the sending and receiving formulas, one boundary at a time.
struct ChainCounts {
  std::vector<long long> a_up{0}, a_down{0}, b_up{0}, b_down{0};
};

inline ChainCounts brute_force_chain(const Link& a, const Link& b, const std::vector<int>& departures, int steps) {
  ChainCounts c;
  auto at = [](const std::vector<long long>& h, int k) {
    if (k < 0) return 0LL;
    return k < static_cast<int>(h.size()) ? h[static_cast<std::size_t>(k)] : h.back();
  };
  auto steps_of = [](double ratio) { return static_cast<int>(std::lround(ratio)); };
  const int fa = steps_of(a.length / a.free_flow_speed);
  const int fb = steps_of(b.length / b.free_flow_speed);
  const int ba = steps_of(a.length / *a.backward_speed);
  const int bb = steps_of(b.length / *b.backward_speed);
  const long long storage_a = static_cast<long long>(std::floor(*a.jam_density * a.length + 1e-9));
  const long long storage_b = static_cast<long long>(std::floor(*b.jam_density * b.length + 1e-9));
  long long released = 0;
  for (int t = 0; t < steps; ++t) {
    const long long qa = static_cast<long long>(a.flow_capacity.at(t));
    const long long qb = static_cast<long long>(b.flow_capacity.at(t));
    const long long waiting =
        std::count_if(departures.begin(), departures.end(), [&](int d) { return d <= t; }) - released;
    const long long ra = std::min(at(c.a_down, t - ba + 1) + storage_a - at(c.a_up, t), qa);
    const long long sa = std::min(at(c.a_up, t - fa + 1) - at(c.a_down, t), qa);
    const long long rb = std::min(at(c.b_down, t - bb + 1) + storage_b - at(c.b_up, t), qb);
    const long long sb = std::min(at(c.b_up, t - fb + 1) - at(c.b_down, t), qb);
    const long long into_a = std::max(0LL, std::min(waiting, ra));
    const long long a_to_b = std::max(0LL, std::min(sa, rb));
    const long long out_b = std::max(0LL, sb);
    released += into_a;
    c.a_up.push_back(c.a_up.back() + into_a);
    c.a_down.push_back(c.a_down.back() + a_to_b);
    c.b_up.push_back(c.b_up.back() + a_to_b);
    c.b_down.push_back(c.b_down.back() + out_b);
  }
  return c;
}

/// One random origin -> a -> b -> sink chain checked against the brute-force
/// counts over a fixed window. Returns an empty string on agreement.
inline std::string check_chain(std::mt19937_64& rng) {
  std::vector<Node> nodes{{NodeId{0}, ""}, {NodeId{1}, ""}, {NodeId{2}, ""}, {NodeId{3}, ""}, {NodeId{4}, ""}};
  Link a = physical(1, 1, 2, rng);
  Link b = physical(2, 2, 3, rng);
  Link origin;
  origin.id = LinkId{0};
  origin.tail = NodeId{0};
  origin.head = NodeId{1};
  origin.dummy = DummyKind::Origin;
  Link sink;
  sink.id = LinkId{3};
  sink.tail = NodeId{3};
  sink.head = NodeId{4};
  sink.dummy = DummyKind::Sink;
  const Network net = Network::build(nodes, {origin, a, b, sink});

  const int vehicles = std::uniform_int_distribution<int>(0, 20)(rng);
  DemandProfile demand;
  std::vector<int> departures;
  for (int k = 0; k < vehicles; ++k) {
    const int d = std::uniform_int_distribution<int>(0, 5)(rng);
    departures.push_back(d);
    demand.entries.push_back({d, NodeId{1}, NodeId{3}, 1, 0, {LinkId{1}, LinkId{2}}});
  }

  Loader loader(net, demand, LoadingModel::LinkTransmission);
  const int steps = 120;
  for (int t = 0; t < steps; ++t) loader.step();
  const ChainCounts expected = brute_force_chain(a, b, departures, steps);
  if (loader.state(LinkId{1}).n_up != expected.a_up) return "upstream counts of the first link differ";
  if (loader.state(LinkId{1}).n_down != expected.a_down) return "downstream counts of the first link differ";
  if (loader.state(LinkId{2}).n_up != expected.b_up) return "upstream counts of the second link differ";
  if (loader.state(LinkId{2}).n_down != expected.b_down) return "downstream counts of the second link differ";
  if (expected.b_down.back() != vehicles) return "chain did not drain";
  return {};
}

}  // namespace mrg::test
