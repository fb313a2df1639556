#include <gtest/gtest.h>

#include <map>

#include "mrg/baseline.hpp"
#include "mrg/dnl.hpp"
#include "support.hpp"

namespace mrg {
namespace {

Link kinematic(int id, double length, double q, double kj, double v = 0.2, double w = 0.1) {
  Link l;
  l.id = LinkId{id};
  l.tail = NodeId{0};
  l.head = NodeId{1};
  l.length = length;
  l.free_flow_speed = v;
  l.backward_speed = w;
  l.flow_capacity = CapacitySchedule(q);
  l.jam_density = kj;
  return l;
}

LinkState counts(std::vector<long long> up, std::vector<long long> down) {
  LinkState s;
  s.n_up = std::move(up);
  s.n_down = std::move(down);
  return s;
}

TEST(SendingFlow, LimitedByArrivals) {
  // L/v = 2, so at t = 3 the vehicles counted upstream by index 2 can leave.
  const Link link = kinematic(1, 0.4, 20, 300);
  EXPECT_EQ(sending_flow_ltm(counts({0, 4, 10, 12}, {0, 0, 0, 0}), link, 3), 10);
}

TEST(SendingFlow, EmptyLinkSendsNothing) {
  const Link link = kinematic(1, 0.4, 20, 300);
  EXPECT_EQ(sending_flow_ltm(counts({0}, {0}), link, 0), 0);
  EXPECT_EQ(sending_flow_ltm(counts({0, 0, 0}, {0, 0, 0}), link, 2), 0);
}

TEST(SendingFlow, LimitedByCapacity) {
  const Link link = kinematic(1, 0.4, 20, 300);
  EXPECT_EQ(sending_flow_ltm(counts({0, 30, 30, 30}, {0, 0, 0, 0}), link, 3), 20);
}

TEST(SendingFlow, ExitCapacityOverridesFlowCapacity) {
  Link link = kinematic(1, 0.4, 20, 300);
  link.exit_capacity.add_piece(0, 5);
  link.exit_capacity.add_piece(4, 1);
  const LinkState s = counts({0, 30, 30, 30, 30}, {0, 0, 0, 0, 0});
  EXPECT_EQ(sending_flow_ltm(s, link, 3), 5);
  EXPECT_EQ(sending_flow_ltm(s, link, 4), 1);
  EXPECT_EQ(receiving_flow_pq(link, 4), 20);
}

TEST(ReceivingFlow, LtmEmptyLinkIsCapacityBound) {
  const Link link = kinematic(3, 0.8, 2, 75);  // k_j L = 60
  ASSERT_EQ(storage_capacity(link), 60);
  EXPECT_EQ(receiving_flow_ltm(counts({0}, {0}), link, 0), 2);
}

TEST(ReceivingFlow, LtmJammedLinkAdmitsNothing) {
  const Link link = kinematic(3, 0.8, 2, 75);
  std::vector<long long> up(12, 60);
  up[0] = 0;
  EXPECT_EQ(receiving_flow_ltm(counts(up, std::vector<long long>(12, 0)), link, 11), 0);
}

TEST(ReceivingFlow, LtmFreedSpaceArrivesAfterTheBackwardWave) {
  // L/w = 8: departures at index 3 are visible to the upstream end from t = 10.
  const Link link = kinematic(3, 0.8, 2, 75);
  std::vector<long long> up(12, 60);
  std::vector<long long> down(12, 0);
  for (std::size_t k = 3; k < down.size(); ++k) down[k] = 1;
  const LinkState s = counts(up, down);
  EXPECT_EQ(receiving_flow_ltm(s, link, 9), 0);
  EXPECT_EQ(receiving_flow_ltm(s, link, 10), 1);
}

TEST(ReceivingFlow, PointQueueIgnoresOccupancy) {
  const Link link = kinematic(1, 0.4, 20, 300);
  EXPECT_EQ(receiving_flow_pq(link, 0), 20);
  EXPECT_EQ(receiving_flow_pq(kinematic(1, 0.4, 0, 300), 0), 0);
}

TEST(ReceivingFlow, PointQueueFollowsCapacitySchedule) {
  Link link = kinematic(3, 0.4, 2, 30);
  link.flow_capacity = CapacitySchedule();
  link.flow_capacity.add_piece(0, 2);
  link.flow_capacity.add_piece(6, 1);
  EXPECT_EQ(receiving_flow_pq(link, 5), 2);
  EXPECT_EQ(receiving_flow_pq(link, 6), 1);
}

TEST(ReceivingFlow, SpatialQueueUsesCurrentStorage) {
  const Link link = kinematic(4, 0.4, 2, 75);  // k_j L = 30
  EXPECT_EQ(receiving_flow_sq(counts({0}, {0}), link, 0), 2);
  EXPECT_EQ(receiving_flow_sq(counts({0, 30}, {0, 0}), link, 1), 0);
  EXPECT_EQ(receiving_flow_sq(counts({0, 29}, {0, 0}), link, 1), 1);
}

TEST(CellTransmission, CellFlows) {
  EXPECT_EQ(ctm_cell_sending(0, 2), 0);
  EXPECT_EQ(ctm_cell_sending(5, 2), 2);
  const CellGeometry g{2, 12.0, 0.5};
  EXPECT_EQ(ctm_cell_receiving(12, g, 2), 0);
  EXPECT_EQ(ctm_cell_receiving(11, g, 2), 0);  // floor(0.5)
  EXPECT_EQ(ctm_cell_receiving(10, g, 2), 1);
  EXPECT_EQ(ctm_cell_receiving(0, g, 2), 2);
}

TEST(CellTransmission, GeometryFromLinkParameters) {
  const CellGeometry g = cell_geometry(kinematic(3, 0.8, 2, 60));
  EXPECT_EQ(g.cells, 4);
  EXPECT_DOUBLE_EQ(g.cell_capacity, 12.0);
  EXPECT_DOUBLE_EQ(g.wave_ratio, 0.5);
}

// Two feeders merging into one target:
//   1 -A(1)-> 3,  2 -B(2)-> 3,  3 -C(3)-> 4,  3 -D(6)-> 4
struct Merge {
  Network network;

  explicit Merge(double qa, double qb, double qc, double qd) {
    std::vector<Node> nodes;
    for (int n : {0, 1, 2, 3, 4, 5, 6}) nodes.push_back({NodeId{n}, ""});
    auto link = [](int id, int tail, int head, double q) {
      Link l = kinematic(id, 0.2, q, 100, 0.2, 0.2);
      l.tail = NodeId{tail};
      l.head = NodeId{head};
      return l;
    };
    auto dummy = [](int id, int tail, int head, DummyKind kind) {
      Link l;
      l.id = LinkId{id};
      l.tail = NodeId{tail};
      l.head = NodeId{head};
      l.dummy = kind;
      return l;
    };
    network = Network::build(nodes, {dummy(0, 0, 1, DummyKind::Origin), link(1, 1, 3, qa), link(2, 2, 3, qb),
                                     link(3, 3, 4, qc), dummy(4, 5, 2, DummyKind::Origin),
                                     dummy(5, 4, 6, DummyKind::Sink), link(6, 3, 4, qd)});
  }

  static DemandEntry fixed(int origin, int count, std::vector<int> route) {
    DemandEntry e;
    e.origin = NodeId{origin};
    e.destination = NodeId{4};
    e.count = count;
    for (int l : route) e.route.push_back(LinkId{l});
    return e;
  }
};

std::map<std::pair<int, int>, std::size_t> transfers(const StepResult& r) {
  std::map<std::pair<int, int>, std::size_t> out;
  for (const auto& f : r.flows) out[{f.from_link.value, f.to_link.value}] += f.vehicles.size();
  return out;
}

TEST(NodeTransfer, InboundLinksAreServedInPriorityOrder) {
  const Merge m(3, 2, 4, 4);
  const DemandProfile demand{{Merge::fixed(1, 3, {1, 3}), Merge::fixed(2, 2, {2, 3})}};
  Loader loader(m.network, demand, LoadingModel::PointQueue);
  loader.step();
  const auto moved = transfers(loader.step());
  EXPECT_EQ(moved.at({1, 3}), 3u);
  EXPECT_EQ(moved.at({2, 3}), 1u);
}

TEST(NodeTransfer, BlockedTargetStopsEveryFeeder) {
  const Merge m(3, 2, 0, 4);
  const DemandProfile demand{{Merge::fixed(1, 3, {1, 3}), Merge::fixed(2, 2, {2, 3})}};
  Loader loader(m.network, demand, LoadingModel::PointQueue);
  loader.step();
  const StepResult r = loader.step();
  EXPECT_TRUE(r.flows.empty());
  EXPECT_EQ(loader.state(LinkId{3}).n_up.back(), 0);
}

TEST(NodeTransfer, FifoWalkSplitsAcrossTargets) {
  const Merge m(3, 2, 2, 2);
  const DemandProfile demand{{Merge::fixed(1, 1, {1, 3}), Merge::fixed(1, 1, {1, 6}), Merge::fixed(1, 1, {1, 3})}};
  Loader loader(m.network, demand, LoadingModel::PointQueue);
  loader.step();
  const auto moved = transfers(loader.step());
  EXPECT_EQ(moved.at({1, 3}), 2u);
  EXPECT_EQ(moved.at({1, 6}), 1u);
}

TEST(NodeTransfer, FifoBlockingHoldsFollowers) {
  const Merge m(3, 2, 1, 2);
  const DemandProfile demand{{Merge::fixed(1, 2, {1, 3}), Merge::fixed(1, 1, {1, 6})}};

  Loader fifo(m.network, demand, LoadingModel::PointQueue, NodeDiscipline::Fifo);
  fifo.step();
  const auto held = transfers(fifo.step());
  EXPECT_EQ(held.at({1, 3}), 1u);
  EXPECT_FALSE(held.contains({1, 6}));

  Loader movement(m.network, demand, LoadingModel::PointQueue, NodeDiscipline::Movement);
  movement.step();
  const auto passed = transfers(movement.step());
  EXPECT_EQ(passed.at({1, 3}), 1u);
  EXPECT_EQ(passed.at({1, 6}), 1u);
}

TEST(Loading, BraessTopLinkTakesFortyFiveSteps) {
  const Experiment e = test::bundled("braess_single");
  DemandProfile demand = e.demand;
  demand.entries[0].route = {LinkId{1}, LinkId{3}};
  Loader loader(e.network, demand, LoadingModel::LinearDelay);
  while (!loader.finished() && loader.clock() < e.settings.horizon) loader.step();
  const VehicleRecord& v = loader.vehicle(0);
  EXPECT_EQ(v.status, VehicleStatus::Arrived);
  EXPECT_EQ(loader.state(LinkId{1}).up(1), 1);
  EXPECT_EQ(loader.state(LinkId{1}).down(45), 0);
  EXPECT_EQ(loader.state(LinkId{1}).down(46), 1);
  EXPECT_EQ(v.arrival_step, 85);
}

TEST(Loading, EmptySystemStaysEmpty) {
  const Experiment e = test::bundled("simple_due");
  Loader loader(e.network, DemandProfile{}, LoadingModel::LinkTransmission);
  EXPECT_TRUE(loader.finished());
  for (int t = 0; t < 5; ++t) {
    const StepResult r = loader.step();
    EXPECT_TRUE(r.flows.empty());
    EXPECT_TRUE(r.arrivals.empty());
  }
  for (const LinkState& s : loader.states()) {
    EXPECT_EQ(s.n_up.back(), 0);
    EXPECT_EQ(s.n_down.back(), 0);
  }
}

TEST(Loading, VehicleWithoutChoiceIsAnError) {
  const Experiment e = test::bundled("simple_due");
  Loader loader(e.network, e.demand, LoadingModel::LinkTransmission);
  EXPECT_THROW(loader.step(), SimulationError);
}

/// Per-vehicle travel times for `on_a` vehicles on link A and the rest on B.
std::vector<int> parallel_run(Experiment e, int on_a, LoadingModel model, NodeDiscipline discipline) {
  const auto classes = demand_classes(e, 4);
  // Routes are ordered by free-flow time, so route 0 uses the short link B.
  std::vector<int> split{classes[0].count - on_a, on_a};
  const DemandProfile fixed = assign_routes(e.demand, classes, {split});
  Loader loader(e.network, fixed, model, discipline);
  while (!loader.finished() && loader.clock() < e.settings.horizon) loader.step();
  std::vector<int> times;
  for (const auto& v : loader.vehicles()) times.push_back(v.arrival_step - v.departure);
  return times;
}

double mean(const std::vector<int>& xs) {
  double s = 0.0;
  for (int x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

TEST(Loading, ParallelNetworkTwentyThirtySplit) {
  const Experiment e = test::bundled("simple_due");
  const auto times = parallel_run(e, 20, LoadingModel::LinkTransmission, NodeDiscipline::Fifo);
  ASSERT_EQ(times.size(), 50u);
  for (int t : times) EXPECT_GT(t, 0);
  EXPECT_NEAR(mean(times), 13.7, 1e-9);
}

TEST(Loading, ModelsAgreeWithoutSpillback) {
  const Experiment e = test::bundled("simple_due");
  for (auto discipline : {NodeDiscipline::Fifo, NodeDiscipline::Movement}) {
    for (int on_a : {0, 10, 20, 21, 25, 50}) {
      const auto ltm = parallel_run(e, on_a, LoadingModel::LinkTransmission, discipline);
      for (auto model : {LoadingModel::PointQueue, LoadingModel::SpatialQueue, LoadingModel::CellTransmission}) {
        EXPECT_EQ(parallel_run(e, on_a, model, discipline), ltm)
            << model_name(model) << " with " << on_a << " on link A";
      }
    }
  }
}

TEST(QueueLength, FreeFlowingLinkHasNoQueue) {
  const Link link = kinematic(1, 0.4, 20, 300);
  // One vehicle per step, each leaving exactly L/v steps after entering.
  const LinkState s = counts({0, 1, 2, 3, 4, 5, 6}, {0, 0, 0, 1, 2, 3, 4});
  for (int t = 0; t < 5; ++t) EXPECT_EQ(queue_length(s, link, t), 0) << t;
}

TEST(QueueLength, SpillbackOnsets) {
  const Experiment e = test::bundled("simple_spillback");
  const auto classes = demand_classes(e, 4);
  ASSERT_EQ(classes.size(), 1u);
  ASSERT_EQ(classes[0].count, 90);
  const DemandProfile fixed = assign_routes(e.demand, classes, {{45, 45}});
  Loader loader(e.network, fixed, e.settings.model, e.settings.discipline);
  loader.enable_trace(true);
  while (!loader.finished() && loader.clock() < e.settings.horizon) loader.step();
  ASSERT_TRUE(loader.finished());

  std::map<int, int> onset;
  for (const TraceRow& row : loader.trace()) {
    if (row.queue > 0 && !onset.contains(row.link.value)) onset[row.link.value] = row.step;
  }
  EXPECT_EQ(onset.at(2), 12);
  EXPECT_EQ(onset.at(1), 20);
}

}  // namespace
}  // namespace mrg
