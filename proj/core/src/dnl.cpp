#include "mrg/dnl.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace mrg {
namespace {

constexpr double kEps = 1e-9;

long long at_index(const std::vector<long long>& history, int k) noexcept {
  if (k < 0) return 0;
  const auto idx = static_cast<std::size_t>(k);
  return idx < history.size() ? history[idx] : history.back();
}

long long cap_at(const Link& link, int t) { return capacity_per_step(link.flow_capacity.at(t)); }

long long exit_cap_at(const Link& link, int t) {
  return link.exit_capacity.empty() ? cap_at(link, t) : capacity_per_step(link.exit_capacity.at(t));
}

}  // namespace

long long LinkState::up(int k) const noexcept { return at_index(n_up, k); }
long long LinkState::down(int k) const noexcept { return at_index(n_down, k); }

long long capacity_per_step(double value) noexcept {
  if (!std::isfinite(value) || value >= static_cast<double>(kUnboundedFlow)) return kUnboundedFlow;
  return std::max(0LL, static_cast<long long>(std::floor(value + kEps)));
}

long long storage_capacity(const Link& link) {
  if (!link.jam_density) throw SimulationError(fmt::format("link {} has no jam density", link.id.value));
  return static_cast<long long>(std::floor(*link.jam_density * link.length + kEps));
}

int free_flow_steps(const Link& link) {
  if (link.free_flow_speed <= 0.0) throw SimulationError(fmt::format("link {} has no free-flow speed", link.id.value));
  return std::max(1, static_cast<int>(std::lround(link.length / link.free_flow_speed)));
}

int backward_steps(const Link& link) {
  if (!link.backward_speed || *link.backward_speed <= 0.0) {
    throw SimulationError(fmt::format("link {} has no backward speed", link.id.value));
  }
  return std::max(1, static_cast<int>(std::lround(link.length / *link.backward_speed)));
}

long long sending_flow_ltm(const LinkState& state, const Link& link, int t) {
  const long long ready = state.up(t - free_flow_steps(link) + 1) - state.down(t);
  return std::clamp(ready, 0LL, exit_cap_at(link, t));
}

long long receiving_flow_ltm(const LinkState& state, const Link& link, int t) {
  const long long room = state.down(t - backward_steps(link) + 1) + storage_capacity(link) - state.up(t);
  return std::clamp(room, 0LL, cap_at(link, t));
}

long long receiving_flow_pq(const Link& link, int t) { return cap_at(link, t); }

long long receiving_flow_sq(const LinkState& state, const Link& link, int t) {
  const long long room = state.down(t) + storage_capacity(link) - state.up(t);
  return std::clamp(room, 0LL, cap_at(link, t));
}

CellGeometry cell_geometry(const Link& link) {
  CellGeometry g;
  g.cells = free_flow_steps(link);
  if (!link.jam_density || !link.backward_speed) {
    throw SimulationError(fmt::format("link {} lacks jam density or backward speed for cells", link.id.value));
  }
  g.cell_capacity = *link.jam_density * link.free_flow_speed;
  g.wave_ratio = *link.backward_speed / link.free_flow_speed;
  return g;
}

long long ctm_cell_sending(long long occupancy, long long capacity) { return std::min(occupancy, capacity); }

long long ctm_cell_receiving(long long occupancy, const CellGeometry& geometry, long long capacity) {
  const double room = geometry.wave_ratio * (geometry.cell_capacity - static_cast<double>(occupancy));
  const long long whole = std::max(0LL, static_cast<long long>(std::floor(room + kEps)));
  return std::min(whole, capacity);
}

long long queue_length(const LinkState& state, const Link& link, int t) {
  return std::max(0LL, state.up(t + 1 - free_flow_steps(link)) - state.down(t + 1));
}

Loader::Loader(const Network& network, const DemandProfile& demand, LoadingModel model, NodeDiscipline discipline)
    : network_(&network), model_(model), discipline_(discipline) {
  validate_model_parameters(network, model);
  if (model != LoadingModel::LinearDelay) {
    const auto issues = validate_discretization(network, 1);
    if (!issues.empty()) {
      throw ConfigError(fmt::format("link {} has non-integral {} = {}", issues.front().link.value,
                                    issues.front().quantity, issues.front().ratio));
    }
  }

  const auto& links = network.links();
  states_.resize(links.size());
  geometry_.resize(links.size());
  committed_.assign(links.size(), 0);
  for (std::size_t i = 0; i < links.size(); ++i) {
    states_[i].link = links[i].id;
    states_[i].n_up = {0};
    states_[i].n_down = {0};
    if (model == LoadingModel::CellTransmission && !links[i].is_dummy()) {
      geometry_[i] = cell_geometry(links[i]);
      states_[i].cells.resize(static_cast<std::size_t>(geometry_[i].cells));
    }
  }

  for (const DemandEntry& e : demand.entries) {
    const auto origin = network.origin_link(e.origin);
    if (!origin) throw ConfigError(fmt::format("origin {} has no dummy origin link", e.origin.value));
    for (int k = 0; k < e.count; ++k) {
      VehicleRecord v;
      v.id = static_cast<VehicleId>(vehicles_.size());
      v.origin = e.origin;
      v.destination = e.destination;
      v.departure = e.departure;
      v.group = e.group;
      v.route = e.route;
      v.link = *origin;
      v.entry_step = e.departure;
      v.ready_step = e.departure;
      vehicles_.push_back(std::move(v));
    }
  }

  // Waiting vehicles leave their origin by departure time, then by id.
  std::vector<VehicleId> order(vehicles_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<VehicleId>(i);
  std::stable_sort(order.begin(), order.end(), [&](VehicleId a, VehicleId b) {
    return vehicles_[static_cast<std::size_t>(a)].departure < vehicles_[static_cast<std::size_t>(b)].departure;
  });
  for (VehicleId id : order) {
    const auto& v = vehicles_[static_cast<std::size_t>(id)];
    auto& s = states_[network.link_index(v.link)];
    s.queue.push_back({id, v.entry_step, v.ready_step, sequence_++});
    s.n_up[0] += 1;
  }
}

NodeId Loader::current_node(VehicleId id) const { return network_->link(vehicle(id).link).head; }

bool Loader::at_head(VehicleId id) const {
  const auto& v = vehicle(id);
  return v.status != VehicleStatus::Arrived && v.ready_step <= clock_;
}

void Loader::set_choice(VehicleId id, LinkId next) {
  auto& v = vehicles_.at(static_cast<std::size_t>(id));
  if (v.status == VehicleStatus::Arrived) throw SimulationError(fmt::format("vehicle {} has already arrived", id));
  const NodeId node = current_node(id);
  const auto& allowed = network_->outbound_links(node);
  if (std::find(allowed.begin(), allowed.end(), next) == allowed.end()) {
    throw SimulationError(fmt::format("link {} is not an outbound link of node {}", next.value, node.value));
  }
  if (v.choice) --committed_[network_->link_index(*v.choice)];
  v.choice = next;
  ++committed_[network_->link_index(next)];
}

void Loader::clear_choice(VehicleId id) {
  auto& v = vehicles_.at(static_cast<std::size_t>(id));
  if (v.choice) --committed_[network_->link_index(*v.choice)];
  v.choice.reset();
}

long long Loader::committed(LinkId link) const { return committed_[network_->link_index(link)]; }

long long Loader::receiving(std::size_t i, int t) const {
  const Link& link = network_->links()[i];
  if (link.dummy == DummyKind::Sink) return kUnboundedFlow;
  if (link.dummy == DummyKind::Origin) return 0;
  switch (model_) {
    case LoadingModel::PointQueue:
      return receiving_flow_pq(link, t);
    case LoadingModel::SpatialQueue:
      return receiving_flow_sq(states_[i], link, t);
    case LoadingModel::LinkTransmission:
      return receiving_flow_ltm(states_[i], link, t);
    case LoadingModel::CellTransmission:
      return ctm_cell_receiving(static_cast<long long>(states_[i].cells.front().size()), geometry_[i], cap_at(link, t));
    case LoadingModel::LinearDelay:
      return cap_at(link, t);
  }
  return 0;
}

long long Loader::sending(std::size_t i, int t) const {
  const Link& link = network_->links()[i];
  if (link.is_dummy() || model_ == LoadingModel::LinearDelay) return exit_cap_at(link, t);
  if (model_ == LoadingModel::CellTransmission) {
    return ctm_cell_sending(static_cast<long long>(states_[i].cells.back().size()), exit_cap_at(link, t));
  }
  return sending_flow_ltm(states_[i], link, t);
}

std::vector<QueuedVehicle> Loader::eligible(std::size_t i, int t) const {
  const Link& link = network_->links()[i];
  const LinkState& s = states_[i];
  const long long limit = sending(i, t);
  std::vector<QueuedVehicle> out;
  if (link.dummy == DummyKind::Sink || limit <= 0) return out;

  if (model_ == LoadingModel::LinearDelay && !link.is_dummy()) {
    for (const auto& q : s.queue) {
      if (q.ready_step <= t) out.push_back(q);
    }
    std::sort(out.begin(), out.end(), [](const QueuedVehicle& a, const QueuedVehicle& b) {
      return a.ready_step != b.ready_step ? a.ready_step < b.ready_step : a.sequence < b.sequence;
    });
    if (static_cast<long long>(out.size()) > limit) out.resize(static_cast<std::size_t>(limit));
    return out;
  }

  const auto& fifo = (model_ == LoadingModel::CellTransmission && !link.is_dummy()) ? s.cells.back() : s.queue;
  for (const auto& q : fifo) {
    if (static_cast<long long>(out.size()) >= limit || q.ready_step > t) break;
    out.push_back(q);
  }
  return out;
}

LinkId Loader::resolve_next(const VehicleRecord& v) const {
  const NodeId node = network_->link(v.link).head;
  if (node == v.destination) return *network_->sink_link(node);
  if (v.is_background()) {
    if (v.route_position >= v.route.size()) {
      throw SimulationError(fmt::format("background vehicle {} ran out of route at node {}", v.id, node.value));
    }
    return v.route[v.route_position];
  }
  if (!v.choice) throw SimulationError(fmt::format("vehicle {} at node {} has no route choice", v.id, node.value));
  return *v.choice;
}

void Loader::remove_from(std::size_t i, VehicleId vehicle) {
  LinkState& s = states_[i];
  auto& container = (model_ == LoadingModel::CellTransmission && !network_->links()[i].is_dummy()) ? s.cells.back() : s.queue;
  if (!container.empty() && container.front().vehicle == vehicle) {
    container.pop_front();
    return;
  }
  auto it = std::find_if(container.begin(), container.end(), [&](const QueuedVehicle& q) { return q.vehicle == vehicle; });
  if (it == container.end()) throw SimulationError(fmt::format("vehicle {} is not at the head of its link", vehicle));
  container.erase(it);
}

void Loader::admit(std::size_t i, VehicleId id, int t) {
  const Link& link = network_->links()[i];
  auto& v = vehicles_[static_cast<std::size_t>(id)];
  v.link = link.id;
  v.entry_step = t;
  v.status = VehicleStatus::EnRoute;
  if (v.choice) {
    --committed_[network_->link_index(*v.choice)];
    v.choice.reset();
  }
  if (v.is_background() && v.route_position < v.route.size() && v.route[v.route_position] == link.id) ++v.route_position;

  if (link.dummy == DummyKind::Sink) {
    v.status = VehicleStatus::Arrived;
    v.arrival_step = t;
    v.ready_step = t;
    ++arrived_;
    return;
  }
  QueuedVehicle q{id, t, t, sequence_++};
  switch (model_) {
    case LoadingModel::CellTransmission:
      q.ready_step = geometry_[i].cells == 1 ? t + 1 : std::numeric_limits<int>::max();
      states_[i].cells.front().push_back(q);
      break;
    case LoadingModel::LinearDelay:
      q.ready_step = std::numeric_limits<int>::max();  // fixed once the step's entries are known
      states_[i].queue.push_back(q);
      break;
    default:
      q.ready_step = t + free_flow_steps(link);
      states_[i].queue.push_back(q);
      break;
  }
  v.ready_step = q.ready_step;
}

StepResult Loader::step() {
  const int t = clock_;
  const auto& links = network_->links();
  const std::size_t n = links.size();
  StepResult result;

  std::vector<long long> remaining(n);
  for (std::size_t i = 0; i < n; ++i) remaining[i] = receiving(i, t);

  // Cell-to-cell advances use start-of-step occupancies.
  std::vector<std::vector<long long>> advances(n);
  if (model_ == LoadingModel::CellTransmission) {
    for (std::size_t i = 0; i < n; ++i) {
      if (links[i].is_dummy()) continue;
      const auto& cells = states_[i].cells;
      const long long cap = cap_at(links[i], t);
      advances[i].assign(cells.size(), 0);
      for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
        advances[i][c] = std::min(ctm_cell_sending(static_cast<long long>(cells[c].size()), cap),
                                  ctm_cell_receiving(static_cast<long long>(cells[c + 1].size()), geometry_[i], cap));
      }
    }
  }

  std::vector<long long> entered(n, 0);
  std::vector<long long> exited(n, 0);
  std::vector<std::size_t> linear_touched;

  for (const Node& node : network_->nodes()) {
    for (LinkId in : network_->inbound_priority(node.id)) {
      const std::size_t from = network_->link_index(in);
      const bool fifo = links[from].is_dummy() ||
                        (model_ != LoadingModel::LinearDelay && discipline_ == NodeDiscipline::Fifo);
      for (const QueuedVehicle& q : eligible(from, t)) {
        const LinkId target = resolve_next(vehicles_[static_cast<std::size_t>(q.vehicle)]);
        const std::size_t to = network_->link_index(target);
        if (links[to].tail != node.id) {
          throw SimulationError(fmt::format("vehicle {} chose link {} which does not leave node {}", q.vehicle,
                                            target.value, node.id.value));
        }
        if (remaining[to] <= 0) {
          if (fifo) break;
          continue;
        }
        --remaining[to];
        remove_from(from, q.vehicle);
        admit(to, q.vehicle, t);
        ++exited[from];
        ++entered[to];
        if (result.flows.empty() || result.flows.back().from_link != in || result.flows.back().to_link != target) {
          result.flows.push_back({in, target, t, {}});
        }
        result.flows.back().vehicles.push_back(q.vehicle);
        if (links[to].dummy == DummyKind::Sink) {
          result.arrivals.push_back({q.vehicle, links[to].tail, t});
        } else {
          result.entries.emplace_back(q.vehicle, target);
          if (model_ == LoadingModel::LinearDelay) linear_touched.push_back(to);
        }
      }
    }
  }

  if (model_ == LoadingModel::CellTransmission) {
    for (std::size_t i = 0; i < n; ++i) {
      auto& cells = states_[i].cells;
      for (std::size_t c = cells.size(); c-- > 1;) {
        for (long long k = 0; k < advances[i][c - 1]; ++k) {
          QueuedVehicle q = cells[c - 1].front();
          cells[c - 1].pop_front();
          if (c + 1 == cells.size()) {
            q.ready_step = t + 1;
            vehicles_[static_cast<std::size_t>(q.vehicle)].ready_step = t + 1;
          }
          cells[c].push_back(q);
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& s = states_[i];
    s.n_up.push_back(s.n_up.back() + entered[i]);
    s.n_down.push_back(s.n_down.back() + exited[i]);
  }

  std::sort(linear_touched.begin(), linear_touched.end());
  linear_touched.erase(std::unique(linear_touched.begin(), linear_touched.end()), linear_touched.end());
  for (std::size_t i : linear_touched) {
    const Link& link = links[i];
    const double base = link.delay_base ? *link.delay_base : link.length / link.free_flow_speed;
    const double x = static_cast<double>(states_[i].occupancy());
    const int delay = std::max(1, static_cast<int>(std::lround(base + link.delay_slope * x)));
    for (auto& q : states_[i].queue) {
      if (q.entry_step == t) {
        q.ready_step = t + delay;
        vehicles_[static_cast<std::size_t>(q.vehicle)].ready_step = t + delay;
      }
    }
  }

  if (trace_enabled_) {
    for (std::size_t i = 0; i < n; ++i) {
      const Link& link = links[i];
      TraceRow row{t, link.id, states_[i].n_up.back(), states_[i].n_down.back(), 0, entered[i]};
      if (!link.is_dummy()) {
        if (model_ == LoadingModel::LinearDelay) {
          row.queue = std::count_if(states_[i].queue.begin(), states_[i].queue.end(),
                                    [&](const QueuedVehicle& q) { return q.ready_step <= t; });
        } else {
          row.queue = queue_length(states_[i], link, t);
        }
      }
      trace_.push_back(row);
    }
  }

  ++clock_;
  return result;
}

}  // namespace mrg
