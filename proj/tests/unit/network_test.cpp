#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "mrg/network.hpp"
#include "support.hpp"

namespace mrg {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;

constexpr const char* kTwoLinks = R"(
[network]
node id=0
node id=1
node id=2
node id=3
link id=0 tail=0 head=1 dummy=origin
link id=1 tail=1 head=2 L=0.4 v=0.2 w=0.1 qmax=2 kj=30
link id=2 tail=2 head=3 dummy=sink
[demand]
demand time=0 origin=1 destination=2 count=3 group=0
[experiment]
horizon=20
)";

std::string expect_config_error(const std::string& text) {
  try {
    (void)load_experiment(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected a configuration error";
  return {};
}

TEST(ConfigText, SimpleNetworkHasSixLinksAndFiftyVehicles) {
  const Experiment e = test::bundled("simple_due");
  EXPECT_EQ(e.network.links().size(), 6u);
  ASSERT_EQ(e.demand.entries.size(), 1u);
  EXPECT_EQ(e.demand.entries[0].count, 50);
  EXPECT_EQ(e.demand.entries[0].departure, 0);
  EXPECT_EQ(e.demand.total(), 50);
}

TEST(ConfigText, DeclaredParametersAreKeptExactly) {
  const Experiment e = test::bundled("simple_due");
  const Link& a = e.network.link(LinkId{3});
  EXPECT_DOUBLE_EQ(a.length, 0.8);
  EXPECT_DOUBLE_EQ(a.free_flow_speed, 0.2);
  EXPECT_DOUBLE_EQ(*a.backward_speed, 0.1);
  EXPECT_DOUBLE_EQ(*a.jam_density, 60.0);
  EXPECT_DOUBLE_EQ(a.flow_capacity.at(0), 2.0);
  EXPECT_TRUE(e.network.link(LinkId{0}).is_dummy());
}

TEST(ConfigText, EmptyTextIsRejected) {
  EXPECT_THAT(expect_config_error(""), HasSubstr("empty"));
  EXPECT_THAT(expect_config_error("   \n# only a comment\n"), HasSubstr("empty"));
}

TEST(ConfigText, UndeclaredNodeNamesTheLink) {
  std::string text = kTwoLinks;
  text.replace(text.find("head=2 L=0.4"), 6, "head=99");
  const std::string message = expect_config_error(text);
  EXPECT_THAT(message, HasSubstr("link 1"));
  EXPECT_THAT(message, HasSubstr("99"));
}

TEST(ConfigText, RejectsUnknownFieldsAndBadNumbers) {
  std::string unknown = kTwoLinks;
  unknown.replace(unknown.find("kj=30"), 5, "jam=30");
  EXPECT_THAT(expect_config_error(unknown), HasSubstr("unknown field"));

  std::string bad = kTwoLinks;
  bad.replace(bad.find("L=0.4"), 5, "L=abc");
  EXPECT_THAT(expect_config_error(bad), HasSubstr("not a number"));
}

TEST(ConfigText, RejectsNonPositiveParameters) {
  std::string text = kTwoLinks;
  text.replace(text.find("L=0.4"), 5, "L=0");
  EXPECT_THAT(expect_config_error(text), HasSubstr("length"));

  std::string wave = kTwoLinks;
  wave.replace(wave.find("w=0.1"), 5, "w=0.3");
  EXPECT_THAT(expect_config_error(wave), HasSubstr("backward speed"));
}

TEST(ConfigText, PartialPriorityOrderIsRejected) {
  const std::string text = R"(
[network]
node id=0
node id=1
node id=2
node id=3
node id=4
link id=0 tail=0 head=1 dummy=origin
link id=1 tail=1 head=2 L=0.2 v=0.2 qmax=1
link id=2 tail=1 head=3 L=0.2 v=0.2 qmax=1
link id=3 tail=2 head=3 L=0.2 v=0.2 qmax=1
link id=4 tail=3 head=4 dummy=sink
priority node=3 links=3
[demand]
demand time=0 origin=1 destination=3 count=1 group=0
[experiment]
horizon=10
model=pq
)";
  EXPECT_THAT(expect_config_error(text), HasSubstr("priority"));
}

TEST(ConfigText, RoundTripsEveryBundledConfig) {
  for (const char* name : {"braess_single", "braess_two", "simple_due", "simple_spillback", "ow"}) {
    const Experiment e = test::bundled(name);
    const Experiment again = load_experiment(to_config_text(e));
    EXPECT_EQ(again, e) << name;
  }
}

TEST(ConfigText, RoundTripKeepsScheduleAndDiscipline) {
  const Experiment e = test::bundled("simple_spillback");
  const std::string text = to_config_text(e);
  EXPECT_THAT(text, HasSubstr("qexit=2@0,1@6"));
  const Experiment again = load_experiment(text);
  EXPECT_DOUBLE_EQ(again.network.link(LinkId{3}).exit_capacity.at(5), 2.0);
  EXPECT_DOUBLE_EQ(again.network.link(LinkId{3}).exit_capacity.at(6), 1.0);
  EXPECT_EQ(test::bundled("simple_due").settings.discipline, NodeDiscipline::Movement);
}

TEST(CapacitySchedule, PiecewiseConstant) {
  CapacitySchedule s;
  s.add_piece(0, 2.0);
  s.add_piece(6, 1.0);
  EXPECT_DOUBLE_EQ(s.at(0), 2.0);
  EXPECT_DOUBLE_EQ(s.at(5), 2.0);
  EXPECT_DOUBLE_EQ(s.at(6), 1.0);
  EXPECT_DOUBLE_EQ(s.at(1000), 1.0);
  EXPECT_THROW(s.add_piece(3, 4.0), ConfigError);
}

Link physical(int id, double length, double v, std::optional<double> w) {
  Link l;
  l.id = LinkId{id};
  l.tail = NodeId{0};
  l.head = NodeId{1};
  l.length = length;
  l.free_flow_speed = v;
  l.backward_speed = w;
  l.flow_capacity = CapacitySchedule(2.0);
  l.jam_density = 30.0;
  return l;
}

TEST(Discretization, IntegralRatiosPass) {
  const Network free_flow = Network::build({{NodeId{0}, ""}, {NodeId{1}, ""}}, {physical(1, 0.4, 0.2, 0.1)});
  EXPECT_TRUE(validate_discretization(free_flow, 1).empty());
}

TEST(Discretization, FractionalFreeFlowRatioIsListed) {
  const Network net = Network::build({{NodeId{0}, ""}, {NodeId{1}, ""}}, {physical(1, 0.5, 0.2, std::nullopt)});
  const auto issues = validate_discretization(net, 1);
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].link, LinkId{1});
  EXPECT_EQ(issues[0].quantity, "L/v");
  EXPECT_NEAR(issues[0].ratio, 2.5, 1e-12);
}

TEST(Discretization, BundledNetworksAreOnTheStepGrid) {
  for (const char* name : {"simple_due", "simple_spillback", "ow"}) {
    EXPECT_TRUE(validate_discretization(test::bundled(name).network, 1).empty()) << name;
  }
}

TEST(Network, BraessOutboundLinks) {
  const Network& net = test::bundled("braess_single").network;
  EXPECT_THAT(net.outbound_links(NodeId{0}), ElementsAre(LinkId{1}, LinkId{2}));
  EXPECT_THAT(net.outbound_links(NodeId{1}), ElementsAre(LinkId{3}));
  EXPECT_TRUE(net.outbound_links(NodeId{3}).empty());
  EXPECT_EQ(net.sink_link(NodeId{3}), LinkId{6});
  EXPECT_THROW((void)net.outbound_links(NodeId{42}), ConfigError);
}

TEST(Network, OutboundLinksLeaveTheirNode) {
  for (const char* name : {"braess_single", "simple_due", "ow"}) {
    const Network& net = test::bundled(name).network;
    for (const Node& n : net.nodes()) {
      for (LinkId l : net.outbound_links(n.id)) EXPECT_EQ(net.link(l).tail, n.id) << name;
    }
  }
}

TEST(Network, InboundOrderDefaultsToAscendingIds) {
  const Network& net = test::bundled("ow").network;
  for (const Node& n : net.nodes()) {
    const auto& in = net.inbound_priority(n.id);
    EXPECT_TRUE(std::is_sorted(in.begin(), in.end()));
  }
}

TEST(Demand, ValidationCatchesBadEntries) {
  const Experiment e = load_experiment(kTwoLinks);
  DemandProfile late = e.demand;
  late.entries[0].departure = 21;
  EXPECT_THROW(validate_demand(e.network, late, 20), ConfigError);
  DemandProfile unknown = e.demand;
  unknown.entries[0].origin = NodeId{2};
  EXPECT_THROW(validate_demand(e.network, unknown, 20), ConfigError);
}

TEST(Models, NamesRoundTrip) {
  for (auto m : {LoadingModel::PointQueue, LoadingModel::SpatialQueue, LoadingModel::CellTransmission,
                 LoadingModel::LinkTransmission, LoadingModel::LinearDelay}) {
    EXPECT_EQ(parse_model(model_name(m)), m);
  }
  EXPECT_FALSE(parse_model("dq").has_value());
}

TEST(Models, MissingParametersAreReported) {
  const Experiment e = test::bundled("braess_single");
  EXPECT_THROW(validate_model_parameters(e.network, LoadingModel::LinkTransmission), ConfigError);
  EXPECT_NO_THROW(validate_model_parameters(e.network, LoadingModel::LinearDelay));
}

}  // namespace
}  // namespace mrg
