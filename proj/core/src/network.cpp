#include "mrg/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include <fmt/format.h>

namespace mrg {

void CapacitySchedule::add_piece(int from_step, double value) {
  if (!pieces_.empty() && from_step <= pieces_.back().first) {
    throw ConfigError(fmt::format("capacity pieces must start at increasing steps (got {} after {})", from_step,
                                  pieces_.back().first));
  }
  pieces_.emplace_back(from_step, value);
}

double CapacitySchedule::at(int step) const noexcept {
  if (pieces_.empty()) return kUnbounded;
  double value = pieces_.front().second;
  for (const auto& [from, v] : pieces_) {
    if (from > step) break;
    value = v;
  }
  return value;
}

std::optional<int> integral_steps(double ratio) {
  if (!std::isfinite(ratio) || ratio < 0.0) return std::nullopt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) return std::nullopt;
  return static_cast<int>(rounded);
}

namespace {

void check_physical(const Link& l) {
  const auto id = l.id.value;
  if (l.delay_base) {
    if (*l.delay_base < 0.0 || l.delay_slope < 0.0) {
      throw ConfigError(fmt::format("link {}: delay parameters must be non-negative", id));
    }
    if (l.length < 0.0 || l.free_flow_speed < 0.0) {
      throw ConfigError(fmt::format("link {}: length and speed must be positive", id));
    }
  } else {
    if (!(l.length > 0.0)) throw ConfigError(fmt::format("link {}: length must be positive", id));
    if (!(l.free_flow_speed > 0.0)) throw ConfigError(fmt::format("link {}: free-flow speed must be positive", id));
  }
  if (l.backward_speed) {
    if (!(*l.backward_speed > 0.0) || *l.backward_speed > l.free_flow_speed) {
      throw ConfigError(fmt::format("link {}: backward speed must satisfy 0 < w <= v", id));
    }
  }
  if (l.jam_density && !(*l.jam_density > 0.0)) {
    throw ConfigError(fmt::format("link {}: jam density must be positive", id));
  }
  for (const auto* schedule : {&l.flow_capacity, &l.exit_capacity}) {
    for (const auto& [from, q] : schedule->pieces()) {
      if (!(q >= 0.0)) throw ConfigError(fmt::format("link {}: flow capacity must be non-negative", id));
      if (from < 0) throw ConfigError(fmt::format("link {}: capacity piece starts before step 0", id));
    }
  }
}

}  // namespace

Network Network::build(std::vector<Node> nodes, std::vector<Link> links,
                       std::map<NodeId, std::vector<LinkId>> priorities) {
  Network net;
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) { return a.id < b.id; });

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].id.valid()) throw ConfigError("node ids must be non-negative");
    if (!net.node_index_.emplace(nodes[i].id.value, i).second) {
      throw ConfigError(fmt::format("duplicate node {}", nodes[i].id.value));
    }
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    if (!l.id.valid()) throw ConfigError("link ids must be non-negative");
    if (!net.link_index_.emplace(l.id.value, i).second) {
      throw ConfigError(fmt::format("duplicate link {}", l.id.value));
    }
    for (NodeId end : {l.tail, l.head}) {
      if (!net.node_index_.contains(end.value)) {
        throw ConfigError(fmt::format("link {} references undeclared node {}", l.id.value, end.value));
      }
    }
    if (l.tail == l.head) throw ConfigError(fmt::format("link {} is a self-loop", l.id.value));
    if (!l.is_dummy()) check_physical(l);
  }

  net.nodes_ = std::move(nodes);
  net.links_ = std::move(links);
  const std::size_t n = net.nodes_.size();
  net.outbound_.assign(n, {});
  net.inbound_.assign(n, {});
  net.origin_.assign(n, std::nullopt);
  net.sink_.assign(n, std::nullopt);

  std::vector<std::size_t> all_out(n, 0);
  std::vector<std::size_t> all_in(n, 0);
  for (const Link& l : net.links_) {
    const auto t = net.node_index_.at(l.tail.value);
    const auto h = net.node_index_.at(l.head.value);
    ++all_out[t];
    ++all_in[h];
    net.inbound_[h].push_back(l.id);
    switch (l.dummy) {
      case DummyKind::None:
        net.outbound_[t].push_back(l.id);
        break;
      case DummyKind::Origin:
        if (net.origin_[h]) {
          throw ConfigError(fmt::format("node {} has more than one dummy origin link", l.head.value));
        }
        net.origin_[h] = l.id;
        break;
      case DummyKind::Sink:
        if (net.sink_[t]) throw ConfigError(fmt::format("node {} has more than one dummy sink link", l.tail.value));
        net.sink_[t] = l.id;
        break;
    }
  }
  // Dummy endpoints are reservoirs: an origin tail feeds only its dummy link,
  // a sink head absorbs only from its dummy link.
  for (const Link& l : net.links_) {
    if (l.dummy == DummyKind::Origin) {
      const auto t = net.node_index_.at(l.tail.value);
      if (all_in[t] != 0 || all_out[t] != 1) {
        throw ConfigError(fmt::format("dummy origin link {} must be the only link at node {}", l.id.value, l.tail.value));
      }
    } else if (l.dummy == DummyKind::Sink) {
      const auto h = net.node_index_.at(l.head.value);
      if (all_out[h] != 0 || all_in[h] != 1) {
        throw ConfigError(fmt::format("dummy sink link {} must be the only link at node {}", l.id.value, l.head.value));
      }
    }
  }

  for (auto& [node, order] : priorities) {
    if (!net.node_index_.contains(node.value)) {
      throw ConfigError(fmt::format("priority order given for undeclared node {}", node.value));
    }
    auto& inbound = net.inbound_[net.node_index_.at(node.value)];
    std::vector<LinkId> sorted_given = order;
    std::sort(sorted_given.begin(), sorted_given.end());
    if (sorted_given != inbound) {
      throw ConfigError(fmt::format("priority order for node {} must list every inbound link exactly once", node.value));
    }
    inbound = order;
  }
  net.explicit_priorities_ = std::move(priorities);

  for (const auto& out : net.outbound_) net.max_out_degree_ = std::max(net.max_out_degree_, out.size());
  return net;
}

std::size_t Network::node_index(NodeId id) const {
  auto it = node_index_.find(id.value);
  if (it == node_index_.end()) throw ConfigError(fmt::format("unknown node {}", id.value));
  return it->second;
}

std::size_t Network::link_index(LinkId id) const {
  auto it = link_index_.find(id.value);
  if (it == link_index_.end()) throw ConfigError(fmt::format("unknown link {}", id.value));
  return it->second;
}

const std::vector<LinkId>& Network::outbound_links(NodeId node) const { return outbound_[node_index(node)]; }

const std::vector<LinkId>& Network::inbound_priority(NodeId node) const { return inbound_[node_index(node)]; }

std::optional<LinkId> Network::origin_link(NodeId node) const { return origin_[node_index(node)]; }

std::optional<LinkId> Network::sink_link(NodeId node) const { return sink_[node_index(node)]; }

bool Network::is_dummy_node(NodeId node) const {
  (void)node_index(node);
  return std::any_of(links_.begin(), links_.end(), [node](const Link& l) {
    return (l.dummy == DummyKind::Origin && l.tail == node) || (l.dummy == DummyKind::Sink && l.head == node);
  });
}

bool Network::reachable(NodeId from, NodeId to) const {
  std::vector<bool> seen(nodes_.size(), false);
  std::deque<std::size_t> frontier{node_index(from)};
  const auto target = node_index(to);
  seen[frontier.front()] = true;
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop_front();
    if (cur == target) return true;
    for (LinkId l : outbound_[cur]) {
      const auto next = node_index(links_[link_index(l)].head);
      if (!seen[next]) {
        seen[next] = true;
        frontier.push_back(next);
      }
    }
  }
  return false;
}

int DemandProfile::total() const noexcept {
  int sum = 0;
  for (const auto& e : entries) sum += e.count;
  return sum;
}

int DemandProfile::controllable() const noexcept {
  int sum = 0;
  for (const auto& e : entries) {
    if (!e.is_background()) sum += e.count;
  }
  return sum;
}

std::optional<LoadingModel> parse_model(std::string_view name) {
  if (name == "pq") return LoadingModel::PointQueue;
  if (name == "sq") return LoadingModel::SpatialQueue;
  if (name == "ctm") return LoadingModel::CellTransmission;
  if (name == "ltm") return LoadingModel::LinkTransmission;
  if (name == "linear") return LoadingModel::LinearDelay;
  return std::nullopt;
}

std::string_view model_name(LoadingModel model) {
  switch (model) {
    case LoadingModel::PointQueue: return "pq";
    case LoadingModel::SpatialQueue: return "sq";
    case LoadingModel::CellTransmission: return "ctm";
    case LoadingModel::LinkTransmission: return "ltm";
    case LoadingModel::LinearDelay: return "linear";
  }
  return "?";
}

std::optional<NodeDiscipline> parse_discipline(std::string_view name) {
  if (name == "fifo") return NodeDiscipline::Fifo;
  if (name == "movement") return NodeDiscipline::Movement;
  return std::nullopt;
}

std::string_view discipline_name(NodeDiscipline discipline) {
  return discipline == NodeDiscipline::Fifo ? "fifo" : "movement";
}

void validate_demand(const Network& network, const DemandProfile& demand, int horizon) {
  for (const auto& e : demand.entries) {
    if (e.count <= 0) throw ConfigError(fmt::format("demand count must be positive (origin {})", e.origin.value));
    if (e.departure < 0 || e.departure > horizon) {
      throw ConfigError(fmt::format("demand departure {} outside [0, {}]", e.departure, horizon));
    }
    if (!network.has_node(e.origin)) throw ConfigError(fmt::format("demand references unknown origin {}", e.origin.value));
    if (!network.has_node(e.destination)) {
      throw ConfigError(fmt::format("demand references unknown destination {}", e.destination.value));
    }
    if (!network.origin_link(e.origin)) {
      throw ConfigError(fmt::format("origin {} has no dummy origin link", e.origin.value));
    }
    if (!network.sink_link(e.destination)) {
      throw ConfigError(fmt::format("destination {} has no dummy sink link", e.destination.value));
    }
    if (!network.reachable(e.origin, e.destination)) {
      throw ConfigError(fmt::format("destination {} is not reachable from origin {}", e.destination.value, e.origin.value));
    }
    if (e.is_background()) {
      NodeId at = e.origin;
      for (LinkId l : e.route) {
        if (!network.has_link(l)) throw ConfigError(fmt::format("background route uses unknown link {}", l.value));
        const Link& link = network.link(l);
        if (link.is_dummy() || link.tail != at) {
          throw ConfigError(fmt::format("background route is not a connected physical path at link {}", l.value));
        }
        at = link.head;
      }
      if (at != e.destination) throw ConfigError("background route does not end at its destination");
    }
  }
}

void validate_model_parameters(const Network& network, LoadingModel model) {
  for (const Link& l : network.links()) {
    if (l.is_dummy()) continue;
    const auto id = l.id.value;
    const bool needs_kinematics = model != LoadingModel::LinearDelay;
    if (needs_kinematics && !(l.length > 0.0 && l.free_flow_speed > 0.0)) {
      throw ConfigError(fmt::format("link {}: model {} needs L and v", id, model_name(model)));
    }
    if (model == LoadingModel::LinearDelay && !l.delay_base && !(l.length > 0.0 && l.free_flow_speed > 0.0)) {
      throw ConfigError(fmt::format("link {}: linear model needs t0 or L and v", id));
    }
    if ((model == LoadingModel::SpatialQueue || model == LoadingModel::LinkTransmission ||
         model == LoadingModel::CellTransmission) &&
        !l.jam_density) {
      throw ConfigError(fmt::format("link {}: model {} needs a jam density", id, model_name(model)));
    }
    if ((model == LoadingModel::LinkTransmission || model == LoadingModel::CellTransmission) && !l.backward_speed) {
      throw ConfigError(fmt::format("link {}: model {} needs a backward speed", id, model_name(model)));
    }
  }
}

std::vector<DiscretizationIssue> validate_discretization(const Network& network, int dt) {
  std::vector<DiscretizationIssue> issues;
  for (const Link& l : network.links()) {
    if (l.is_dummy() || !(l.free_flow_speed > 0.0) || !(l.length > 0.0)) continue;
    const double by_v = l.length / (l.free_flow_speed * dt);
    if (auto steps = integral_steps(by_v); !steps || *steps < 1) issues.push_back({l.id, "L/v", by_v});
    if (l.backward_speed) {
      const double by_w = l.length / (*l.backward_speed * dt);
      if (auto steps = integral_steps(by_w); !steps || *steps < 1) issues.push_back({l.id, "L/w", by_w});
    }
  }
  return issues;
}

}  // namespace mrg
